"""The eleven per-run quantitative metrics.

Four navigation metrics (time to goal, path length, cumulative heading
changes, average linear velocity) and seven social ones (social work, social
work per second, average minimum distance to the closest person, and the four
proxemics zone occupancies).

Everything is computed on a common analysis clock: the robot trajectory is
resampled to ``dt`` and agents are interpolated onto the robot's grid, absent
outside their own recorded span. Inter-agent forces follow the classic
exponential repulsion with an anisotropic field-of-view weight; distances are
center to center (radii enter only through the force exponent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ExperimentRecord, ObstacleMap, Pose2D, TimedState, Trajectory, resample, sample_at, wrap_angle
from .tables import MetricTable, RunKey

METRIC_NAMES = ("TTG", "PL", "CHC", "ARV", "SW", "SW_s", "AMD",
                "PR_I", "PR_PE", "PR_S", "PR_PU")

ANALYSIS_DT = 0.05  # 20 Hz, typical tracker rate


@dataclass(frozen=True)
class SfmParams:
    """Exponential-repulsion interaction parameters (Helbing-Molnar defaults).

    ``anisotropy`` = 1 disables the field-of-view weighting entirely.
    """

    force_strength_social: float = 2.1  # m/s^2
    force_range_social: float = 0.3  # m
    agent_radius: float = 0.35  # m
    anisotropy: float = 0.59  # in [0, 1]
    force_strength_obstacle: float = 10.0  # m/s^2
    force_range_obstacle: float = 0.2  # m
    interaction_cutoff: float = 5.0  # m

    def __post_init__(self) -> None:
        for name in ("force_strength_social", "force_range_social", "agent_radius",
                     "force_strength_obstacle", "force_range_obstacle",
                     "interaction_cutoff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 <= self.anisotropy <= 1.0:
            raise ValueError(f"anisotropy must be in [0, 1], got {self.anisotropy}")


@dataclass(frozen=True)
class ProxemicsThresholds:
    """Zone boundaries (Hall's defaults): d <= intimate_max is intimate,
    <= personal_max personal, <= social_max social, beyond that public."""

    intimate_max: float = 0.45
    personal_max: float = 1.2
    social_max: float = 3.6

    def __post_init__(self) -> None:
        if not 0.0 < self.intimate_max < self.personal_max < self.social_max:
            raise ValueError(
                f"thresholds must satisfy 0 < intimate < personal < social, got "
                f"({self.intimate_max}, {self.personal_max}, {self.social_max})"
            )


@dataclass(frozen=True)
class MetricVector:
    """All eleven metrics for one run. ``amd`` is None when no person was
    ever present. The proxemics percentages sum to 100."""

    ttg: float
    pl: float
    chc: float
    arv: float
    sw: float
    sw_s: float
    amd: float | None
    pr_i: float
    pr_pe: float
    pr_s: float
    pr_pu: float

    def __post_init__(self) -> None:
        pr_sum = self.pr_i + self.pr_pe + self.pr_s + self.pr_pu
        if abs(pr_sum - 100.0) > 1e-6:
            raise ValueError(f"proxemics percentages sum to {pr_sum}, expected 100")
        for name in ("ttg", "pl", "chc", "arv", "sw", "sw_s",
                     "pr_i", "pr_pe", "pr_s", "pr_pu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.amd is not None and self.amd < 0:
            raise ValueError(f"amd must be >= 0, got {self.amd}")

    def as_dict(self) -> dict[str, float | None]:
        return {
            "TTG": self.ttg, "PL": self.pl, "CHC": self.chc, "ARV": self.arv,
            "SW": self.sw, "SW_s": self.sw_s, "AMD": self.amd,
            "PR_I": self.pr_i, "PR_PE": self.pr_pe, "PR_S": self.pr_s,
            "PR_PU": self.pr_pu,
        }


# Trajectory-level metrics -------------------------------------------------------


def time_to_goal(robot: Trajectory) -> float:
    """Run duration in seconds."""
    return robot.t_last - robot.t_first


def path_length(robot: Trajectory) -> float:
    """Sum of Euclidean distances between consecutive positions."""
    total = 0.0
    for a, b in zip(robot.states, robot.states[1:]):
        total += math.hypot(b.pose.x - a.pose.x, b.pose.y - a.pose.y)
    return total


def cumulative_heading_changes(robot: Trajectory) -> float:
    """Total angular distance spanned, in radians."""
    total = 0.0
    for a, b in zip(robot.states, robot.states[1:]):
        total += abs(wrap_angle(b.pose.theta - a.pose.theta))
    return total


def avg_linear_velocity(robot: Trajectory) -> float:
    """Time-weighted mean of |v_lin| (trapezoidal in time)."""
    integral = 0.0
    for a, b in zip(robot.states, robot.states[1:]):
        integral += 0.5 * (abs(a.v_lin) + abs(b.v_lin)) * (b.t - a.t)
    return integral / (robot.t_last - robot.t_first)


# Social force ------------------------------------------------------------------


def _facing(pose: Pose2D, vel: tuple[float, float]) -> tuple[float, float]:
    # stationary subjects face along their pose heading
    speed = math.hypot(vel[0], vel[1])
    if speed > 1e-12:
        return (vel[0] / speed, vel[1] / speed)
    return (math.cos(pose.theta), math.sin(pose.theta))


def social_force(
    target_pose: Pose2D,
    target_vel: tuple[float, float],
    source_pose: Pose2D,
    params: SfmParams,
) -> tuple[float, float]:
    """Repulsive force the source exerts on the target, in m/s^2.

    Magnitude A * exp((2r - d) / B) weighted by w = lambda +
    (1 - lambda) * (1 + cos phi) / 2, where phi is the angle between the
    target's direction of motion and the direction from target to source.
    Zero beyond the interaction cutoff.
    """
    dx = target_pose.x - source_pose.x
    dy = target_pose.y - source_pose.y
    d = math.hypot(dx, dy)
    if d < 1e-12:
        raise ValueError("coincident positions: social force direction is singular")
    if d > params.interaction_cutoff:
        return (0.0, 0.0)
    ex, ey = dx / d, dy / d
    fx, fy = _facing(target_pose, target_vel)
    cos_phi = fx * -ex + fy * -ey
    w = params.anisotropy + (1.0 - params.anisotropy) * 0.5 * (1.0 + cos_phi)
    mag = params.force_strength_social * math.exp(
        (2.0 * params.agent_radius - d) / params.force_range_social
    ) * w
    return (mag * ex, mag * ey)


def _nearest_on_segment(px: float, py: float, seg: tuple[float, float, float, float]
                        ) -> tuple[float, float]:
    x1, y1, x2, y2 = seg
    vx, vy = x2 - x1, y2 - y1
    L2 = vx * vx + vy * vy
    if L2 == 0.0:
        return (x1, y1)
    u = ((px - x1) * vx + (py - y1) * vy) / L2
    u = min(max(u, 0.0), 1.0)
    return (x1 + u * vx, y1 + u * vy)


def obstacle_force(pose: Pose2D, obstacle_map: ObstacleMap | None,
                   params: SfmParams) -> tuple[float, float]:
    """Repulsive force from the nearest map segment, zero without a map or
    beyond the cutoff. Same exponential form, isotropic."""
    if obstacle_map is None or not obstacle_map.segments:
        return (0.0, 0.0)
    best_d = math.inf
    best_pt = (0.0, 0.0)
    for seg in obstacle_map.segments:
        qx, qy = _nearest_on_segment(pose.x, pose.y, seg)
        d = math.hypot(pose.x - qx, pose.y - qy)
        if d < best_d:
            best_d = d
            best_pt = (qx, qy)
    if best_d > params.interaction_cutoff:
        return (0.0, 0.0)
    if best_d < 1e-12:
        raise ValueError("pose lies on an obstacle segment: force direction is singular")
    ex = (pose.x - best_pt[0]) / best_d
    ey = (pose.y - best_pt[1]) / best_d
    mag = params.force_strength_obstacle * math.exp(
        (params.agent_radius - best_d) / params.force_range_obstacle
    )
    return (mag * ex, mag * ey)


# Common-clock alignment ----------------------------------------------------------


@dataclass(frozen=True)
class AlignedRun:
    """Robot resampled to the analysis clock, agents sampled on the same grid
    (None where an agent's recording does not cover the step)."""

    dt: float
    robot: Trajectory
    agents: tuple[tuple[TimedState | None, ...], ...]  # [agent][step]

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.robot.states]


def align_record(rec: ExperimentRecord, dt: float = ANALYSIS_DT) -> AlignedRun:
    robot = resample(rec.robot, dt)
    times = [s.t for s in robot.states]
    agents = tuple(
        tuple(sample_at(agent, t) for t in times) for agent in rec.agents
    )
    return AlignedRun(dt=dt, robot=robot, agents=agents)


def _vel_vec(state: TimedState) -> tuple[float, float]:
    return (state.v_lin * math.cos(state.pose.theta),
            state.v_lin * math.sin(state.pose.theta))


def _social_work_steps(aligned: AlignedRun, obstacle_map: ObstacleMap | None,
                       params: SfmParams) -> list[float]:
    """Per-step work: |net social force on robot| + |obstacle force on robot|
    + sum of per-person force moduli the robot provokes (within cutoff)."""
    steps = []
    for k, rstate in enumerate(aligned.robot.states):
        r_vel = _vel_vec(rstate)
        net_x = net_y = 0.0
        provoked = 0.0
        for agent_steps in aligned.agents:
            astate = agent_steps[k]
            if astate is None:
                continue
            d = math.hypot(rstate.pose.x - astate.pose.x, rstate.pose.y - astate.pose.y)
            if d > params.interaction_cutoff:
                continue
            on_robot = social_force(rstate.pose, r_vel, astate.pose, params)
            net_x += on_robot[0]
            net_y += on_robot[1]
            on_agent = social_force(astate.pose, _vel_vec(astate), rstate.pose, params)
            provoked += math.hypot(on_agent[0], on_agent[1])
        obs = obstacle_force(rstate.pose, obstacle_map, params)
        steps.append(math.hypot(net_x, net_y) + math.hypot(obs[0], obs[1]) + provoked)
    return steps


def social_work(rec: ExperimentRecord, params: SfmParams | None = None,
                dt: float = ANALYSIS_DT, raw_sum: bool = False) -> tuple[float, float]:
    """Total social work and its per-second average.

    The default integrates per-step work over time (value * step length) so
    the total does not depend on the sampling rate; ``raw_sum`` reproduces a
    plain sum over steps instead.
    """
    params = params or SfmParams()
    aligned = align_record(rec, dt)
    return _social_work_from_aligned(aligned, rec.map, params, raw_sum)


def _social_work_from_aligned(aligned: AlignedRun, obstacle_map: ObstacleMap | None,
                              params: SfmParams, raw_sum: bool) -> tuple[float, float]:
    steps = _social_work_steps(aligned, obstacle_map, params)
    times = aligned.times
    if raw_sum:
        total = sum(steps)
    else:
        total = sum(w * (t1 - t0) for w, t0, t1 in zip(steps, times, times[1:]))
    duration = times[-1] - times[0]
    return (total, total / duration)


def _min_distances(aligned: AlignedRun) -> list[float | None]:
    """Per-step distance to the closest present person (None when nobody is)."""
    out: list[float | None] = []
    for k, rstate in enumerate(aligned.robot.states):
        best: float | None = None
        for agent_steps in aligned.agents:
            astate = agent_steps[k]
            if astate is None:
                continue
            d = math.hypot(rstate.pose.x - astate.pose.x, rstate.pose.y - astate.pose.y)
            if best is None or d < best:
                best = d
        out.append(best)
    return out


def avg_min_distance(rec: ExperimentRecord, dt: float = ANALYSIS_DT) -> float | None:
    """Mean over steps (with at least one person present) of the distance to
    the closest person; None when no person appears during the run."""
    aligned = align_record(rec, dt)
    return _amd_from_aligned(aligned)


def _amd_from_aligned(aligned: AlignedRun) -> float | None:
    dists = [d for d in _min_distances(aligned) if d is not None]
    if not dists:
        return None
    return sum(dists) / len(dists)


def proxemics_occupancy(rec: ExperimentRecord, thr: ProxemicsThresholds | None = None,
                        dt: float = ANALYSIS_DT) -> tuple[float, float, float, float]:
    """Percentages of steps spent in the intimate / personal / social / public
    zone of the closest person. Steps with nobody present count as public."""
    thr = thr or ProxemicsThresholds()
    aligned = align_record(rec, dt)
    return _proxemics_from_aligned(aligned, thr)


def _proxemics_from_aligned(aligned: AlignedRun, thr: ProxemicsThresholds
                            ) -> tuple[float, float, float, float]:
    counts = [0, 0, 0, 0]
    dists = _min_distances(aligned)
    for d in dists:
        if d is None or d > thr.social_max:
            counts[3] += 1
        elif d <= thr.intimate_max:
            counts[0] += 1
        elif d <= thr.personal_max:
            counts[1] += 1
        else:
            counts[2] += 1
    total = len(dists)
    return tuple(100.0 * c / total for c in counts)  # type: ignore[return-value]


def compute_all(rec: ExperimentRecord, params: SfmParams | None = None,
                thr: ProxemicsThresholds | None = None, dt: float = ANALYSIS_DT,
                raw_sum: bool = False) -> MetricVector:
    """All eleven metrics on the common analysis clock."""
    params = params or SfmParams()
    thr = thr or ProxemicsThresholds()
    aligned = align_record(rec, dt)
    sw, sw_s = _social_work_from_aligned(aligned, rec.map, params, raw_sum)
    pr = _proxemics_from_aligned(aligned, thr)
    return MetricVector(
        ttg=time_to_goal(aligned.robot),
        pl=path_length(aligned.robot),
        chc=cumulative_heading_changes(aligned.robot),
        arv=avg_linear_velocity(aligned.robot),
        sw=sw,
        sw_s=sw_s,
        amd=_amd_from_aligned(aligned),
        pr_i=pr[0],
        pr_pe=pr[1],
        pr_s=pr[2],
        pr_pu=pr[3],
    )


def compute_metric_table(records: list[ExperimentRecord],
                         params: SfmParams | None = None,
                         thr: ProxemicsThresholds | None = None,
                         dt: float = ANALYSIS_DT,
                         raw_sum: bool = False) -> MetricTable:
    keys = [RunKey(r.experiment_id, r.scenario_id, r.run_index) for r in records]
    columns: dict[str, list[float | None]] = {name: [] for name in METRIC_NAMES}
    for rec in records:
        vec = compute_all(rec, params=params, thr=thr, dt=dt, raw_sum=raw_sum)
        for name, value in vec.as_dict().items():
            columns[name].append(value)
    return MetricTable(keys=keys, columns=columns)
