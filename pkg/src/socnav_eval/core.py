"""Domain types for navigation runs: poses, trajectories, maps, survey tables.

All positions are in meters, times in seconds, angles in radians. Every
stored heading is normalized to (-pi, pi].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

# Velocity envelope of the recording platform. Exceeding it is a warning by
# default and an error under strict validation, so third-party logs still load.
ROBOT_V_LIN_MAX = 0.6
ROBOT_V_ANG_MAX = 1.5

_VEL_EPS = 1e-9

SCENARIO_NAMES = (
    "passing",
    "overtaking",
    "crossing_1",
    "crossing_2",
    "crossing_3",
    "curious",
    "narrow_turn",
    "mixed",
)


class SchemaError(ValueError):
    """A dataset file does not conform to the expected schema."""


class ValidationError(ValueError):
    """A dataset file parses but violates a semantic invariant."""


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    w = (theta + math.pi) % (2.0 * math.pi) - math.pi
    if w == -math.pi:
        return math.pi
    return w


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError(f"non-finite pose position ({self.x}, {self.y})")
        if not math.isfinite(self.theta):
            raise ValidationError(f"non-finite heading {self.theta}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class TimedState:
    """One tracked sample: time, pose, and commanded/observed velocities."""

    t: float
    pose: Pose2D
    v_lin: float = 0.0
    v_ang: float = 0.0

    def __post_init__(self) -> None:
        for name in ("t", "v_lin", "v_ang"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"non-finite {name} in state at t={self.t}")


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered states of one subject (robot or human)."""

    states: tuple[TimedState, ...]
    subject_id: str = "robot"
    subject_kind: str = "robot"  # "robot" | "human"

    def __post_init__(self) -> None:
        if len(self.states) < 2:
            raise ValidationError(
                f"trajectory '{self.subject_id}' needs >= 2 states, got {len(self.states)}"
            )
        if self.subject_kind not in ("robot", "human"):
            raise ValidationError(f"unknown subject_kind '{self.subject_kind}'")
        ts = [s.t for s in self.states]
        for a, b in zip(ts, ts[1:]):
            if b <= a:
                raise ValidationError(
                    f"trajectory '{self.subject_id}': timestamps not strictly "
                    f"increasing ({a} -> {b})"
                )

    @property
    def t_first(self) -> float:
        return self.states[0].t

    @property
    def t_last(self) -> float:
        return self.states[-1].t

    @property
    def duration(self) -> float:
        return self.t_last - self.t_first


Segment = tuple[float, float, float, float]  # x1, y1, x2, y2


@dataclass(frozen=True)
class ObstacleMap:
    """Static obstacles as 2D line segments inside a bounding rectangle."""

    segments: tuple[Segment, ...]
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax

    def __post_init__(self) -> None:
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmin < xmax and ymin < ymax):
            raise ValidationError(f"degenerate map bounds {self.bounds}")
        eps = 1e-9
        for seg in self.segments:
            x1, y1, x2, y2 = seg
            for x, y in ((x1, y1), (x2, y2)):
                if not (xmin - eps <= x <= xmax + eps and ymin - eps <= y <= ymax + eps):
                    raise ValidationError(f"segment {seg} outside bounds {self.bounds}")


@dataclass(frozen=True)
class ExperimentRecord:
    """One recorded run: a robot trajectory plus zero or more people."""

    experiment_id: str
    scenario_id: str
    run_index: int
    robot: Trajectory
    agents: tuple[Trajectory, ...]
    goal: Pose2D
    map: ObstacleMap | None = None

    def __post_init__(self) -> None:
        if self.run_index < 1:
            raise ValidationError(f"run_index must be >= 1, got {self.run_index}")
        if self.robot.subject_kind != "robot":
            raise ValidationError("robot trajectory must have subject_kind 'robot'")
        for a in self.agents:
            if a.subject_kind != "human":
                raise ValidationError(f"agent '{a.subject_id}' must have subject_kind 'human'")

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.experiment_id, self.scenario_id, self.run_index)


def validate_record(rec: ExperimentRecord, strict: bool = False, source: str = "") -> None:
    """Check platform velocity limits on the robot states.

    Violations raise under strict mode and warn otherwise.
    """
    where = f" in {source}" if source else ""
    for s in rec.robot.states:
        bad = None
        if not (-_VEL_EPS <= s.v_lin <= ROBOT_V_LIN_MAX + _VEL_EPS):
            bad = f"v_lin={s.v_lin}"
        elif abs(s.v_ang) > ROBOT_V_ANG_MAX + _VEL_EPS:
            bad = f"v_ang={s.v_ang}"
        if bad is None:
            continue
        msg = (
            f"robot state at t={s.t}{where} exceeds velocity limits ({bad}; "
            f"expected v_lin in [0, {ROBOT_V_LIN_MAX}], |v_ang| <= {ROBOT_V_ANG_MAX})"
        )
        if strict:
            raise ValidationError(msg)
        warnings.warn(msg)
        return  # one warning per record is enough
    if strict and abs(rec.robot.t_first) > 1e-9:
        raise ValidationError(
            f"robot trajectory{where} must start at t=0 (got t={rec.robot.t_first})"
        )


def _interp_heading(th0: float, th1: float, frac: float) -> float:
    """Interpolate on the circle along the shortest arc."""
    return wrap_angle(th0 + frac * wrap_angle(th1 - th0))


def resample(traj: Trajectory, dt: float) -> Trajectory:
    """Resample a trajectory onto a uniform clock of step ``dt``.

    Grid points are t_first, t_first + dt, ... ; the final recorded state is
    appended when the duration is not an integer multiple of dt, so both
    endpoints are preserved exactly. Positions and velocities interpolate
    linearly, headings along the shortest arc.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt >= traj.duration:
        raise ValueError(f"dt={dt} >= trajectory duration {traj.duration}")

    n_steps = int(math.floor(traj.duration / dt + 1e-9))
    times = [traj.t_first + k * dt for k in range(n_steps + 1)]
    if times[-1] < traj.t_last - 1e-9:
        times.append(traj.t_last)
    else:
        times[-1] = traj.t_last

    states: list[TimedState] = []
    idx = 0
    src = traj.states
    for t in times:
        while idx + 1 < len(src) - 1 and src[idx + 1].t <= t:
            idx += 1
        a, b = src[idx], src[idx + 1]
        frac = (t - a.t) / (b.t - a.t)
        frac = min(max(frac, 0.0), 1.0)
        states.append(
            TimedState(
                t=t,
                pose=Pose2D(
                    x=a.pose.x + frac * (b.pose.x - a.pose.x),
                    y=a.pose.y + frac * (b.pose.y - a.pose.y),
                    theta=_interp_heading(a.pose.theta, b.pose.theta, frac),
                ),
                v_lin=a.v_lin + frac * (b.v_lin - a.v_lin),
                v_ang=a.v_ang + frac * (b.v_ang - a.v_ang),
            )
        )
    return Trajectory(states=tuple(states), subject_id=traj.subject_id,
                      subject_kind=traj.subject_kind)


def sample_at(traj: Trajectory, t: float) -> TimedState | None:
    """Interpolated state at time ``t``, or None outside the recorded span."""
    if t < traj.t_first - 1e-9 or t > traj.t_last + 1e-9:
        return None
    src = traj.states
    lo, hi = 0, len(src) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if src[mid].t <= t:
            lo = mid
        else:
            hi = mid
    a, b = src[lo], src[hi]
    frac = (t - a.t) / (b.t - a.t)
    frac = min(max(frac, 0.0), 1.0)
    return TimedState(
        t=t,
        pose=Pose2D(
            x=a.pose.x + frac * (b.pose.x - a.pose.x),
            y=a.pose.y + frac * (b.pose.y - a.pose.y),
            theta=_interp_heading(a.pose.theta, b.pose.theta, frac),
        ),
        v_lin=a.v_lin + frac * (b.v_lin - a.v_lin),
        v_ang=a.v_ang + frac * (b.v_ang - a.v_ang),
    )


def rigid_transform_record(
    rec: ExperimentRecord, angle: float = 0.0, dx: float = 0.0, dy: float = 0.0
) -> ExperimentRecord:
    """Rotate by ``angle`` about the origin, then translate, every geometric
    element of a record (trajectories, goal, map). Velocities are scalars and
    are unchanged."""
    c, s = math.cos(angle), math.sin(angle)

    def xf_pose(p: Pose2D) -> Pose2D:
        return Pose2D(
            x=c * p.x - s * p.y + dx,
            y=s * p.x + c * p.y + dy,
            theta=wrap_angle(p.theta + angle),
        )

    def xf_traj(traj: Trajectory) -> Trajectory:
        return Trajectory(
            states=tuple(
                TimedState(t=st.t, pose=xf_pose(st.pose), v_lin=st.v_lin, v_ang=st.v_ang)
                for st in traj.states
            ),
            subject_id=traj.subject_id,
            subject_kind=traj.subject_kind,
        )

    new_map = None
    if rec.map is not None:
        pts = []
        for x1, y1, x2, y2 in rec.map.segments:
            pts.append(
                (
                    c * x1 - s * y1 + dx,
                    s * x1 + c * y1 + dy,
                    c * x2 - s * y2 + dx,
                    s * x2 + c * y2 + dy,
                )
            )
        xs = [v for seg in pts for v in (seg[0], seg[2])]
        ys = [v for seg in pts for v in (seg[1], seg[3])]
        xmin, ymin, xmax, ymax = rec.map.bounds
        corners = [(xmin, ymin), (xmin, ymax), (xmax, ymin), (xmax, ymax)]
        cx = [c * x - s * y + dx for x, y in corners]
        cy = [s * x + c * y + dy for x, y in corners]
        bounds = (
            min(cx + xs),
            min(cy + ys),
            max(cx + xs),
            max(cy + ys),
        )
        new_map = ObstacleMap(segments=tuple(pts), bounds=bounds)

    return ExperimentRecord(
        experiment_id=rec.experiment_id,
        scenario_id=rec.scenario_id,
        run_index=rec.run_index,
        robot=xf_traj(rec.robot),
        agents=tuple(xf_traj(a) for a in rec.agents),
        goal=xf_pose(rec.goal),
        map=new_map,
    )


# Survey-side types -----------------------------------------------------------

HM_NAMES = ("unobtrusiveness", "friendliness", "smoothness", "foresight")

LIKERT_MIN = 1.0
LIKERT_MAX = 5.0


@dataclass(frozen=True)
class SurveyEntry:
    """Mean and standard deviation of one human metric on the 1-5 scale."""

    mean: float
    std: float

    def __post_init__(self) -> None:
        if not (LIKERT_MIN <= self.mean <= LIKERT_MAX):
            raise ValidationError(
                f"survey mean {self.mean} outside Likert range [{LIKERT_MIN}, {LIKERT_MAX}]"
            )
        if self.std < 0:
            raise ValidationError(f"survey std {self.std} must be >= 0")


@dataclass(frozen=True)
class SurveyRow:
    """Survey aggregates for one experiment; absent metrics stay absent."""

    experiment_id: str
    entries: dict[str, SurveyEntry] = field(default_factory=dict)
    n_responses: int = 0

    def __post_init__(self) -> None:
        unknown = set(self.entries) - set(HM_NAMES)
        if unknown:
            raise ValidationError(f"unknown human metric(s) {sorted(unknown)}")


@dataclass
class SurveyTable:
    rows: dict[str, SurveyRow] = field(default_factory=dict)

    def add(self, row: SurveyRow) -> None:
        if row.experiment_id in self.rows:
            raise ValidationError(f"duplicate experiment_id '{row.experiment_id}' in survey")
        self.rows[row.experiment_id] = row

    def __len__(self) -> int:
        return len(self.rows)

    def __contains__(self, experiment_id: str) -> bool:
        return experiment_id in self.rows
