"""Per-scenario scaling of raw metrics and survey scores to [0, 1].

Quantitative metrics are scaled ratio-to-best within each scenario: the best
run gets 1.0 and the others their share of it (``best/value`` when lower is
better, ``value/best`` when higher is better). A min-max alternative is kept
for sensitivity checks. Survey scores are divided by the top of the Likert
scale; missing survey cells stay missing, with an explicit imputation step for
the clustering stage only.
"""

from __future__ import annotations

import warnings

from .core import HM_NAMES, SurveyTable
from .metrics import METRIC_NAMES
from .tables import MetricTable, NormalizedTable, RunKey

LOWER_BETTER = ("TTG", "PL", "CHC", "SW", "SW_s", "PR_I", "PR_PE")
HIGHER_BETTER = ("ARV", "AMD", "PR_S", "PR_PU")

NORM_METHODS = ("ratio", "minmax")


def default_directions() -> dict[str, str]:
    """Map every metric name to 'lower' or 'higher' (better)."""
    out = {name: "lower" for name in LOWER_BETTER}
    out.update({name: "higher" for name in HIGHER_BETTER})
    return {name: out[name] for name in METRIC_NAMES}


def directions_with_overrides(overrides: dict[str, str] | None = None) -> dict[str, str]:
    """Default directionality with config-style overrides ('high'/'low' accepted)."""
    dirs = default_directions()
    for name, value in (overrides or {}).items():
        if name not in dirs:
            raise ValueError(f"unknown metric '{name}' in directionality overrides")
        norm = {"high": "higher", "higher": "higher",
                "low": "lower", "lower": "lower"}.get(value.strip().lower())
        if norm is None:
            raise ValueError(f"direction for '{name}' must be high or low, got '{value}'")
        dirs[name] = norm
    return dirs


def _check_directions(columns: list[str], directions: dict[str, str]) -> None:
    missing = [c for c in columns if c not in directions]
    if missing:
        raise ValueError(f"no directionality given for column(s) {missing}")
    bad = {n: d for n, d in directions.items() if d not in ("lower", "higher")}
    if bad:
        raise ValueError(f"directionality must be 'lower' or 'higher': {bad}")


def _scenario_groups(keys: list[RunKey]) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for i, key in enumerate(keys):
        groups.setdefault(key.scenario_id, []).append(i)
    return groups


def _normalize_group_ratio(values: list[float], lower: bool, label: str) -> list[float]:
    best = min(values) if lower else max(values)
    if best == 0.0:
        if all(v == 0.0 for v in values):
            warnings.warn(f"{label}: all values are zero; scores set to 1.0")
            return [1.0] * len(values)
        if lower:
            # zero is unbeatable for a lower-better metric; the ratio rule
            # would divide by it, so cap the zero runs at 1.0
            warnings.warn(f"{label}: zero values for a lower-better metric; capped at 1.0")
            return [1.0 if v == 0.0 else 0.0 for v in values]
        warnings.warn(f"{label}: best value is zero; scores set to 1.0")
        return [1.0] * len(values)
    if lower:
        return [best / v if v != 0.0 else 1.0 for v in values]
    return [v / best for v in values]


def _normalize_group_minmax(values: list[float], lower: bool, label: str) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return [1.0] * len(values)
    if lower:
        return [(hi - v) / (hi - lo) for v in values]
    return [(v - lo) / (hi - lo) for v in values]


def normalize_qm(raw: MetricTable, directions: dict[str, str] | None = None,
                 method: str = "ratio") -> NormalizedTable:
    """Scale each metric within each scenario so the best run scores 1.0.

    Missing cells (a metric that was undefined for a run) stay missing and are
    excluded from the best-value computation.
    """
    directions = directions or default_directions()
    _check_directions(list(raw.columns), directions)
    if method not in NORM_METHODS:
        raise ValueError(f"method must be one of {NORM_METHODS}, got '{method}'")
    groups = _scenario_groups(raw.keys)
    for scenario, idxs in groups.items():
        if len(idxs) < 2:
            raise ValueError(f"scenario '{scenario}' has {len(idxs)} run(s); need >= 2")
    norm_fn = _normalize_group_ratio if method == "ratio" else _normalize_group_minmax
    out: dict[str, list[float | None]] = {}
    for name, col in raw.columns.items():
        for v in col:
            if v is not None and v < 0:
                raise ValueError(f"metric '{name}' has negative value {v}")
        scores: list[float | None] = [None] * len(col)
        lower = directions[name] == "lower"
        for scenario, idxs in groups.items():
            present = [(i, col[i]) for i in idxs if col[i] is not None]
            if not present:
                continue
            values = [v for _, v in present]
            group_scores = norm_fn(values, lower, f"{name}/{scenario}")
            for (i, _), s in zip(present, group_scores):
                scores[i] = s
        out[name] = scores
    return NormalizedTable(keys=list(raw.keys), columns=out, kind="qm")


def scale_hm(survey: SurveyTable, keys: list[RunKey]) -> NormalizedTable:
    """Survey means and stds divided by the Likert maximum (5).

    ``keys`` fixes the row order and carries scenario/run information the
    survey file does not have. Experiments without a survey row get all-missing
    cells, with a warning.
    """
    columns: dict[str, list[float | None]] = {name: [] for name in HM_NAMES}
    stds: dict[str, list[float | None]] = {name: [] for name in HM_NAMES}
    unmatched = []
    for key in keys:
        row = survey.rows.get(key.experiment_id)
        if row is None:
            unmatched.append(key.experiment_id)
        for name in HM_NAMES:
            entry = row.entries.get(name) if row is not None else None
            columns[name].append(None if entry is None else entry.mean / 5.0)
            stds[name].append(None if entry is None else entry.std / 5.0)
    if unmatched:
        warnings.warn(f"no survey row for experiment(s) {unmatched}; cells left missing")
    return NormalizedTable(keys=list(keys), columns=columns, kind="hm", stds=stds)


def impute_hm_for_clustering(hm: NormalizedTable) -> NormalizedTable:
    """Fill each missing cell with the row mean of the present cells.

    Present cells are never altered; filled cells are flagged in ``imputed``.
    A row with no present value at all is an error.
    """
    if hm.kind != "hm":
        raise ValueError("imputation applies to HM tables only")
    names = list(hm.columns)
    filled: dict[str, list[float | None]] = {name: list(hm.columns[name]) for name in names}
    imputed: set[tuple[str, str]] = set()
    for i, key in enumerate(hm.keys):
        present = [hm.columns[name][i] for name in names if hm.columns[name][i] is not None]
        if not present:
            raise ValueError(f"experiment '{key.experiment_id}' has no survey values to impute from")
        if len(present) == len(names):
            continue
        mean = sum(present) / len(present)
        for name in names:
            if filled[name][i] is None:
                filled[name][i] = mean
                imputed.add((key.experiment_id, name))
    return NormalizedTable(keys=list(hm.keys), columns=filled, kind="hm",
                           stds=hm.stds, imputed=imputed)
