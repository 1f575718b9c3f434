"""From-scratch clustering: k-means++, silhouette, adjusted Rand index, and
the exhaustive metric-subset search with cumulative scoring.

All of it is deterministic for a fixed seed, restart count, and input order.
Feature spaces are the [0,1]-normalized tables; no extra standardization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .tables import NormalizedTable

DEFAULT_SEED = 42
DEFAULT_RESTARTS = 10
MAX_ITER = 300


@dataclass(frozen=True)
class Partition:
    """Cluster assignment of n items into k non-empty clusters."""

    labels: tuple[int, ...]
    k: int
    inertia: float = 0.0
    inertia_history: tuple[float, ...] = ()
    ids: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        seen = set(self.labels)
        if any(not 0 <= lab < self.k for lab in seen):
            raise ValueError(f"labels must lie in [0, {self.k})")
        if seen != set(range(self.k)):
            raise ValueError(f"all {self.k} clusters must be non-empty, got labels {sorted(seen)}")
        if self.ids is not None and len(self.ids) != len(self.labels):
            raise ValueError("ids and labels lengths differ")

    def __len__(self) -> int:
        return len(self.labels)


def partition_from_labels(labels, ids: tuple[str, ...] | None = None) -> Partition:
    """Relabel arbitrary hashable labels to 0..k-1 (first-appearance order)."""
    order: dict = {}
    mapped = []
    for lab in labels:
        if lab not in order:
            order[lab] = len(order)
        mapped.append(order[lab])
    return Partition(labels=tuple(mapped), k=len(order), ids=ids)


def feature_matrix(table: NormalizedTable, columns: list[str]) -> np.ndarray:
    """Stack named columns into an (n, f) float array; missing cells error."""
    cols = []
    for name in columns:
        col = table.columns[name]
        if any(v is None for v in col):
            raise ValueError(f"column '{name}' has missing cells; impute or drop it first")
        cols.append(col)
    return np.array(cols, dtype=float).T


def _plus_plus_init(X: np.ndarray, x2: np.ndarray, k: int,
                    rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    idx = int(rng.integers(n))
    centers[0] = X[idx]
    d2 = x2 + float(centers[0] @ centers[0]) - 2.0 * (X @ centers[0])
    np.maximum(d2, 0.0, out=d2)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))  # all remaining points coincide with chosen centers
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = X[idx]
        nd2 = x2 + float(centers[j] @ centers[j]) - 2.0 * (X @ centers[j])
        np.maximum(nd2, 0.0, out=nd2)
        np.minimum(d2, nd2, out=d2)
    return centers


def _lloyd(X: np.ndarray, x2: np.ndarray, centers: np.ndarray
           ) -> tuple[np.ndarray, float, list[float]]:
    n, _ = X.shape
    k = centers.shape[0]
    labels: np.ndarray | None = None
    history: list[float] = []
    for _ in range(MAX_ITER):
        c2 = np.einsum("ij,ij->i", centers, centers)
        d2 = x2[:, None] + c2[None, :] - 2.0 * (X @ centers.T)
        new_labels = np.argmin(d2, axis=1)
        diff = X - centers[new_labels]
        inertia = float(np.einsum("ij,ij->", diff, diff))
        if history and inertia > history[-1] * (1.0 + 1e-12) + 1e-12:
            raise RuntimeError("k-means inertia increased between iterations")
        history.append(inertia)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        reseeded: set[int] = set()
        for j in range(k):
            mask = labels == j
            if mask.any():
                centers[j] = X[mask].mean(axis=0)
            else:
                # re-seed an emptied centroid at the point farthest from its
                # current assignment
                res = np.einsum("ij,ij->i", X - centers[labels], X - centers[labels])
                for used in reseeded:
                    res[used] = -1.0
                far = int(np.argmax(res))
                centers[j] = X[far]
                reseeded.add(far)
    assert labels is not None
    return labels, history[-1], history


def kmeans(points: np.ndarray, k: int, seed: int = DEFAULT_SEED,
           restarts: int = DEFAULT_RESTARTS,
           ids: tuple[str, ...] | None = None) -> Partition:
    """Best-inertia result over k-means++ restarts, Lloyd to a fixpoint."""
    X = np.asarray(points, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"points must be 2-D, got shape {X.shape}")
    n = X.shape[0]
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    x2 = np.einsum("ij,ij->i", X, X)
    rng = np.random.default_rng(seed)
    best: tuple[float, np.ndarray, list[float]] | None = None
    for _ in range(restarts):
        centers = _plus_plus_init(X, x2, k, rng)
        labels, inertia, history = _lloyd(X, x2, centers.copy())
        if best is None or inertia < best[0] - 1e-15:
            best = (inertia, labels, history)
    inertia, labels, history = best  # type: ignore[misc]
    # canonical label numbering: order of first appearance
    part = partition_from_labels(labels.tolist(), ids=ids)
    return Partition(labels=part.labels, k=part.k, inertia=inertia,
                     inertia_history=tuple(history), ids=ids)


def silhouette(points: np.ndarray, part: Partition) -> float:
    """Mean silhouette with Euclidean distances; singleton points score 0."""
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    if len(part) != n:
        raise ValueError(f"partition covers {len(part)} items, points have {n}")
    if part.k < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    labels = np.asarray(part.labels)
    # direct coordinate differences: the expanded-square shortcut loses
    # precision for near-coincident points
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    sizes = np.bincount(labels, minlength=part.k)
    scores = np.zeros(n)
    for i in range(n):
        own = labels[i]
        if sizes[own] == 1:
            continue
        a = dist[i][labels == own].sum() / (sizes[own] - 1)
        b = math.inf
        for j in range(part.k):
            if j == own:
                continue
            b = min(b, dist[i][labels == j].mean())
        scores[i] = (b - a) / max(a, b)
    return float(scores.mean())


def ari(a: Partition, b: Partition) -> float:
    """Hubert-Arabie adjusted Rand index, exact integer arithmetic."""
    if a.ids is not None and b.ids is not None and a.ids != b.ids:
        raise ValueError("partitions cover different experiment sets")
    if len(a) != len(b):
        raise ValueError(f"partition sizes differ: {len(a)} vs {len(b)}")
    n = len(a)
    cont = np.zeros((a.k, b.k), dtype=np.int64)
    for la, lb in zip(a.labels, b.labels):
        cont[la, lb] += 1
    index = sum(math.comb(int(nij), 2) for nij in cont.ravel())
    sum_a = sum(math.comb(int(m), 2) for m in cont.sum(axis=1))
    sum_b = sum(math.comb(int(m), 2) for m in cont.sum(axis=0))
    npairs = math.comb(n, 2)
    # ari = (index - sa*sb/N) / ((sa+sb)/2 - sa*sb/N), cleared of denominators
    num = 2 * (index * npairs - sum_a * sum_b)
    den = npairs * (sum_a + sum_b) - 2 * sum_a * sum_b
    if den == 0:
        warnings.warn("both partitions are trivial; ARI defined as 1.0")
        return 1.0
    return num / den


@dataclass(frozen=True)
class SubsetResult:
    """ARI achieved by clustering on one metric subset."""

    metrics: tuple[str, ...]
    ari: float
    k: int

    def __post_init__(self) -> None:
        if not self.metrics:
            raise ValueError("metric subset must be non-empty")
        if not -1.0 <= self.ari <= 1.0 + 1e-12:
            raise ValueError(f"ari {self.ari} outside [-1, 1]")

    @property
    def joined(self) -> str:
        return "+".join(self.metrics)


def subset_search(qm: NormalizedTable, hm_partition: Partition, k: int,
                  seed: int = DEFAULT_SEED, restarts: int = DEFAULT_RESTARTS,
                  columns: list[str] | None = None) -> list[SubsetResult]:
    """Cluster every non-empty subset of the QM columns and score it against
    the survey-space partition (the ground truth).

    Results are sorted by ARI descending, then smaller subsets first, then by
    name. Columns with missing cells are dropped with a warning.
    """
    if columns is None:
        columns = list(qm.columns)
    complete = [c for c in columns if all(v is not None for v in qm.columns[c])]
    dropped = [c for c in columns if c not in complete]
    if dropped:
        warnings.warn(f"dropping column(s) with missing cells from subset search: {dropped}")
    if not complete:
        raise ValueError("no complete QM columns to search over")
    if len(qm.keys) != len(hm_partition):
        raise ValueError("QM table and reference partition cover different experiment sets")
    full = feature_matrix(qm, complete)
    col_index = {c: i for i, c in enumerate(complete)}
    results: list[SubsetResult] = []
    for size in range(1, len(complete) + 1):
        for combo in combinations(complete, size):
            sub = full[:, [col_index[c] for c in combo]]
            part = kmeans(sub, k=k, seed=seed, restarts=restarts)
            results.append(SubsetResult(metrics=combo, ari=ari(part, hm_partition), k=k))
    results.sort(key=lambda r: (-r.ari, len(r.metrics), r.joined))
    return results


def cumulative_ari(results: list[SubsetResult]) -> list[tuple[str, float]]:
    """Per-metric sum of ARI over every subset containing it, sorted descending."""
    totals: dict[str, float] = {}
    for res in results:
        for name in res.metrics:
            totals[name] = totals.get(name, 0.0) + res.ari
    return sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))


def silhouette_by_k(points: np.ndarray, ks: list[int], seed: int = DEFAULT_SEED,
                    restarts: int = DEFAULT_RESTARTS,
                    ids: tuple[str, ...] | None = None
                    ) -> dict[int, tuple[Partition, float]]:
    """K-means partitions and silhouettes over a grid of cluster counts."""
    out: dict[int, tuple[Partition, float]] = {}
    for k in ks:
        part = kmeans(points, k=k, seed=seed, restarts=restarts, ids=ids)
        out[k] = (part, silhouette(points, part))
    return out


def best_k(scores: dict[int, tuple[Partition, float]]) -> int:
    """Cluster count with the highest silhouette (smallest k on ties)."""
    return min(scores, key=lambda k: (-scores[k][1], k))
