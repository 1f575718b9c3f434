"""Per-run aggregate scores and scenario-level trend comparison.

Each run gets three scores in [0, 1]: the mean of its scaled survey metrics,
the mean over the full quantitative set, and the mean over a chosen "optimal"
subset. Trend agreement then asks, scenario by scenario, whether the
quantitative rankings of the runs reproduce the survey ranking.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .metrics import METRIC_NAMES
from .rankstats import kendall_statistic
from .tables import NormalizedTable

DEFAULT_OPTIMAL_SET = ("TTG", "ARV", "AMD", "PR_I", "PR_S")


@dataclass(frozen=True)
class MetricSetSpec:
    """A named, non-empty selection of quantitative metric columns."""

    name: str
    members: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError(f"metric set '{self.name}' is empty")
        unknown = [m for m in self.members if m not in METRIC_NAMES]
        if unknown:
            raise ValueError(f"metric set '{self.name}' has unknown member(s) {unknown}")
        if len(set(self.members)) != len(self.members):
            raise ValueError(f"metric set '{self.name}' has duplicate members")


def optimal_set_spec(members: tuple[str, ...] | None = None) -> MetricSetSpec:
    return MetricSetSpec(name="optimal", members=members or DEFAULT_OPTIMAL_SET)


def full_set_spec() -> MetricSetSpec:
    return MetricSetSpec(name="full", members=METRIC_NAMES)


def aggregate(norm: NormalizedTable, set_spec: MetricSetSpec) -> list[float]:
    """Unweighted per-run mean over the member columns, present cells only."""
    members = [m for m in set_spec.members if m in norm.columns]
    if not members:
        raise ValueError(
            f"metric set '{set_spec.name}' shares no columns with the table "
            f"(members {set_spec.members})")
    scores: list[float] = []
    for i, key in enumerate(norm.keys):
        present = [norm.columns[m][i] for m in members if norm.columns[m][i] is not None]
        if not present:
            raise ValueError(
                f"experiment '{key.experiment_id}' has no values for metric set "
                f"'{set_spec.name}'")
        scores.append(sum(present) / len(present))
    return scores


def aggregate_hm(hm: NormalizedTable) -> tuple[list[float | None], list[float | None]]:
    """Per-run mean of present survey scores and the mean of their stds.

    Runs with no survey values at all yield None (they can still carry
    quantitative aggregates).
    """
    means: list[float | None] = []
    stds: list[float | None] = []
    for i in range(len(hm.keys)):
        values = [col[i] for col in hm.columns.values() if col[i] is not None]
        means.append(sum(values) / len(values) if values else None)
        if hm.stds is not None:
            svals = [col[i] for col in hm.stds.values() if col[i] is not None]
            stds.append(sum(svals) / len(svals) if svals else None)
        else:
            stds.append(None)
    return means, stds


@dataclass(frozen=True)
class AggregateRow:
    """The three per-run aggregate scores (survey ones optional)."""

    experiment_id: str
    scenario_id: str
    run_index: int
    hm_mean: float | None
    hm_std: float | None
    qm_full: float
    qm_optimal: float

    def __post_init__(self) -> None:
        for name in ("hm_mean", "qm_full", "qm_optimal"):
            v = getattr(self, name)
            if v is not None and not -1e-9 <= v <= 1.0 + 1e-9:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.hm_std is not None and self.hm_std < 0:
            raise ValueError(f"hm_std={self.hm_std} must be >= 0")


def build_aggregate_rows(qm: NormalizedTable, hm: NormalizedTable | None,
                         optimal: MetricSetSpec | None = None) -> list[AggregateRow]:
    optimal = optimal or optimal_set_spec()
    full_scores = aggregate(qm, full_set_spec())
    opt_scores = aggregate(qm, optimal)
    if hm is not None:
        if hm.keys != qm.keys:
            raise ValueError("QM and HM tables must cover the same experiments in the same order")
        hm_means, hm_stds = aggregate_hm(hm)
    else:
        hm_means = [None] * len(qm.keys)
        hm_stds = [None] * len(qm.keys)
    return [
        AggregateRow(
            experiment_id=key.experiment_id, scenario_id=key.scenario_id,
            run_index=key.run_index, hm_mean=hm_means[i], hm_std=hm_stds[i],
            qm_full=full_scores[i], qm_optimal=opt_scores[i],
        )
        for i, key in enumerate(qm.keys)
    ]


@dataclass(frozen=True)
class ScenarioTrend:
    """Rank agreement between survey and quantitative scores within a scenario."""

    scenario_id: str
    n_runs: int
    tau_full: float | None
    tau_optimal: float | None
    best_match_full: bool
    best_match_optimal: bool
    worst_match_full: bool
    worst_match_optimal: bool


@dataclass(frozen=True)
class TrendReport:
    scenarios: tuple[ScenarioTrend, ...]
    best_fraction_full: float
    best_fraction_optimal: float
    worst_fraction_full: float
    worst_fraction_optimal: float
    mean_tau_full: float | None
    mean_tau_optimal: float | None


def _argbest(values: list[float], best_is_max: bool) -> set[int]:
    target = max(values) if best_is_max else min(values)
    return {i for i, v in enumerate(values) if v == target}


def trend_agreement(rows: list[AggregateRow]) -> TrendReport:
    """Per-scenario Kendall tau of run rankings plus best/worst-run matches.

    Scenarios with fewer than 2 runs, or without survey scores, are skipped
    with a warning. Best/worst matches count when the argbest sets intersect.
    """
    by_scenario: dict[str, list[AggregateRow]] = {}
    for row in rows:
        by_scenario.setdefault(row.scenario_id, []).append(row)
    trends: list[ScenarioTrend] = []
    for scenario_id, group in by_scenario.items():
        if len(group) < 2:
            warnings.warn(f"scenario '{scenario_id}' has {len(group)} run(s); skipped")
            continue
        if any(r.hm_mean is None for r in group):
            warnings.warn(f"scenario '{scenario_id}' lacks survey scores; skipped")
            continue
        group = sorted(group, key=lambda r: r.run_index)
        hm = [r.hm_mean for r in group]
        full = [r.qm_full for r in group]
        opt = [r.qm_optimal for r in group]
        hm_best = _argbest(hm, True)
        hm_worst = _argbest(hm, False)
        trends.append(ScenarioTrend(
            scenario_id=scenario_id,
            n_runs=len(group),
            tau_full=kendall_statistic(hm, full),
            tau_optimal=kendall_statistic(hm, opt),
            best_match_full=bool(hm_best & _argbest(full, True)),
            best_match_optimal=bool(hm_best & _argbest(opt, True)),
            worst_match_full=bool(hm_worst & _argbest(full, False)),
            worst_match_optimal=bool(hm_worst & _argbest(opt, False)),
        ))
    if not trends:
        raise ValueError("no scenario had enough runs and survey scores for a trend report")
    n = len(trends)
    taus_full = [t.tau_full for t in trends if t.tau_full is not None]
    taus_opt = [t.tau_optimal for t in trends if t.tau_optimal is not None]
    return TrendReport(
        scenarios=tuple(trends),
        best_fraction_full=sum(t.best_match_full for t in trends) / n,
        best_fraction_optimal=sum(t.best_match_optimal for t in trends) / n,
        worst_fraction_full=sum(t.worst_match_full for t in trends) / n,
        worst_fraction_optimal=sum(t.worst_match_optimal for t in trends) / n,
        mean_tau_full=sum(taus_full) / len(taus_full) if taus_full else None,
        mean_tau_optimal=sum(taus_opt) / len(taus_opt) if taus_opt else None,
    )


def affine_fit(qm_scores: list[float], hm_scores: list[float | None]
               ) -> tuple[float, float] | None:
    """Least-squares (slope, intercept) mapping QM aggregates onto HM ones.

    Informational only; None when under two paired points or degenerate.
    """
    pairs = [(q, h) for q, h in zip(qm_scores, hm_scores) if h is not None]
    if len(pairs) < 2:
        return None
    xs = [q for q, _ in pairs]
    ys = [h for _, h in pairs]
    n = len(pairs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        return None
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx
    return (slope, my - slope * mx)
