"""Spearman and Kendall rank correlations with significance filtering.

Both statistics are tie-aware (average ranks; tau-b). Spearman p-values come
from the two-sided t approximation; Kendall p-values from the exact
S-distribution for small untied samples and from the tie-adjusted normal
approximation otherwise. A correlation between a quantitative and a human
metric counts as consistent only when both tests clear their strength and
significance thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from scipy.special import stdtr

from .tables import NormalizedTable

KENDALL_EXACT_MAX_N = 30


def average_ranks(values: list[float]) -> list[float]:
    """1-based ranks, ties sharing their average rank."""
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = 0.5 * (i + j) + 1.0
        for m in range(i, j + 1):
            ranks[order[m]] = avg
        i = j + 1
    return ranks


def _check_inputs(x: list[float], y: list[float], min_n: int
                  ) -> tuple[list[float], list[float], int]:
    """Validate lengths/variability and coerce to plain floats."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < min_n:
        raise ValueError(f"need at least {min_n} observations, got {n}")
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if min(x) == max(x) or min(y) == max(y):
        raise ValueError("constant input: rank correlation is undefined")
    return x, y, n


def spearman(x: list[float], y: list[float]) -> tuple[float, float]:
    """Spearman rho with a two-sided t-approximation p-value."""
    x, y, n = _check_inputs(x, y, 4)
    rx = average_ranks(x)
    ry = average_ranks(y)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    rho = cov / math.sqrt(vx * vy)
    rho = min(1.0, max(-1.0, rho))
    if 1.0 - abs(rho) < 1e-13:
        return (rho, 0.0)
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return (rho, p)


def _pair_counts(x: list[float], y: list[float]) -> tuple[int, int, int, int]:
    """Concordant and discordant pair counts plus tie corrections n1, n2."""
    n = len(x)
    conc = disc = 0
    for i in range(n):
        for j in range(i + 1, n):
            a = (x[i] > x[j]) - (x[i] < x[j])
            b = (y[i] > y[j]) - (y[i] < y[j])
            prod = a * b
            if prod > 0:
                conc += 1
            elif prod < 0:
                disc += 1
    n1 = sum(c * (c - 1) // 2 for c in _tie_sizes(x))
    n2 = sum(c * (c - 1) // 2 for c in _tie_sizes(y))
    return conc, disc, n1, n2


def _tie_sizes(values: list[float]) -> list[int]:
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return [c for c in counts.values() if c > 1]


def _inversion_counts(n: int) -> list[int]:
    """Number of permutations of n items with k inversions, k = 0..n(n-1)/2."""
    counts = [1]
    for m in range(2, n + 1):
        prefix = [0]
        for c in counts:
            prefix.append(prefix[-1] + c)
        top = len(counts) - 1 + (m - 1)
        new = []
        for k in range(top + 1):
            lo = max(0, k - (m - 1))
            hi = min(k, len(counts) - 1)
            new.append(prefix[hi + 1] - prefix[lo])
        counts = new
    return counts


def _kendall_p_exact(s: int, n: int) -> float:
    """Two-sided P(|S| >= |s|) under the null, no ties."""
    if s == 0:
        return 1.0
    npairs = n * (n - 1) // 2
    counts = _inversion_counts(n)
    # S = npairs - 2 * inversions, so S >= |s| means inversions <= (npairs - |s|) / 2
    kmax = (npairs - abs(s)) // 2
    tail = sum(counts[: kmax + 1])
    p = 2 * Fraction(tail, math.factorial(n))
    return float(min(p, Fraction(1)))


def _kendall_p_normal(s: int, x: list[float], y: list[float]) -> float:
    """Two-sided normal approximation with the full tie-adjusted variance."""
    n = len(x)
    tx = _tie_sizes(x)
    ty = _tie_sizes(y)
    vt = sum(t * (t - 1) * (2 * t + 5) for t in tx)
    vu = sum(u * (u - 1) * (2 * u + 5) for u in ty)
    v0 = n * (n - 1) * (2 * n + 5)
    var = (v0 - vt - vu) / 18.0
    var += (sum(t * (t - 1) * (t - 2) for t in tx)
            * sum(u * (u - 1) * (u - 2) for u in ty)) / (9.0 * n * (n - 1) * (n - 2))
    var += (sum(t * (t - 1) for t in tx)
            * sum(u * (u - 1) for u in ty)) / (2.0 * n * (n - 1))
    if var <= 0:
        return 1.0
    z = s / math.sqrt(var)
    return math.erfc(abs(z) / math.sqrt(2.0))


def kendall(x: list[float], y: list[float]) -> tuple[float, float]:
    """Kendall tau-b with a two-sided p-value.

    The p-value is exact (pair-count distribution) for untied samples with
    n <= 30 and the tie-adjusted normal approximation otherwise.
    """
    x, y, n = _check_inputs(x, y, 4)
    conc, disc, n1, n2 = _pair_counts(x, y)
    npairs = n * (n - 1) // 2
    s = conc - disc
    tau = s / math.sqrt((npairs - n1) * (npairs - n2))
    tau = min(1.0, max(-1.0, tau))
    if n1 == 0 and n2 == 0 and n <= KENDALL_EXACT_MAX_N:
        p = _kendall_p_exact(s, n)
    else:
        p = _kendall_p_normal(s, x, y)
    return (tau, p)


def kendall_statistic(x: list[float], y: list[float]) -> float | None:
    """Tau-b alone, defined for n >= 2; None when either input is constant."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValueError(f"need at least 2 observations, got {len(x)}")
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if min(x) == max(x) or min(y) == max(y):
        return None
    conc, disc, n1, n2 = _pair_counts(x, y)
    npairs = len(x) * (len(x) - 1) // 2
    return (conc - disc) / math.sqrt((npairs - n1) * (npairs - n2))


@dataclass(frozen=True)
class Thresholds:
    """Consistency gates: both tests must clear strength and significance."""

    rho_min: float = 0.4
    tau_min: float = 0.25
    p_max_rho: float = 0.05
    p_max_tau: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 <= self.rho_min < 1.0 or not 0.0 <= self.tau_min < 1.0:
            raise ValueError("strength thresholds must lie in [0, 1)")
        if not 0.0 < self.p_max_rho <= 1.0 or not 0.0 < self.p_max_tau <= 1.0:
            raise ValueError("p-value thresholds must lie in (0, 1]")


@dataclass(frozen=True)
class CorrelationEntry:
    """One QM-HM pair: both statistics, their p-values, and the verdict.

    ``note`` is empty for a clean evaluation, or names why the statistics are
    unavailable ("insufficient-data", "constant-input").
    """

    qm_name: str
    hm_name: str
    n: int
    rho: float | None
    p_rho: float | None
    tau: float | None
    p_tau: float | None
    consistent: bool
    strength: float | None
    note: str = ""

    def __post_init__(self) -> None:
        if self.consistent and self.note:
            raise ValueError("a consistent entry cannot carry a failure note")


def consistent_correlations(qm: NormalizedTable, hm: NormalizedTable,
                            thr: Thresholds | None = None) -> list[CorrelationEntry]:
    """Evaluate every QM column against every HM column.

    Experiments missing either value are dropped pairwise per pair. Pairs with
    fewer than 4 joint observations, or with a constant column, are marked via
    ``note`` instead of erroring.
    """
    thr = thr or Thresholds()
    if qm.keys != hm.keys:
        raise ValueError("QM and HM tables must cover the same experiments in the same order")
    entries: list[CorrelationEntry] = []
    for qm_name, qm_col in qm.columns.items():
        for hm_name, hm_col in hm.columns.items():
            pairs = [(q, h) for q, h in zip(qm_col, hm_col)
                     if q is not None and h is not None]
            n = len(pairs)
            if n < 4:
                entries.append(CorrelationEntry(
                    qm_name=qm_name, hm_name=hm_name, n=n, rho=None, p_rho=None,
                    tau=None, p_tau=None, consistent=False, strength=None,
                    note="insufficient-data"))
                continue
            xs = [q for q, _ in pairs]
            ys = [h for _, h in pairs]
            try:
                rho, p_rho = spearman(xs, ys)
                tau, p_tau = kendall(xs, ys)
            except ValueError:
                entries.append(CorrelationEntry(
                    qm_name=qm_name, hm_name=hm_name, n=n, rho=None, p_rho=None,
                    tau=None, p_tau=None, consistent=False, strength=None,
                    note="constant-input"))
                continue
            consistent = (abs(rho) > thr.rho_min and p_rho < thr.p_max_rho
                          and abs(tau) > thr.tau_min and p_tau < thr.p_max_tau)
            entries.append(CorrelationEntry(
                qm_name=qm_name, hm_name=hm_name, n=n, rho=rho, p_rho=p_rho,
                tau=tau, p_tau=p_tau, consistent=consistent,
                strength=0.5 * (abs(rho) + abs(tau))))
    return entries
