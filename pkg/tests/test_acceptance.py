"""End-to-end acceptance checks, one numbered criterion per test.

Each test prints a single PASS/FAIL line (criterion 8 may print SKIP) so the
suite output doubles as an acceptance report. Oracles here are written from
first principles, independent of the library internals they check.
"""

from __future__ import annotations

import itertools
import math
import os
import time
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from socnav_eval.aggregate import build_aggregate_rows, full_set_spec, optimal_set_spec, trend_agreement
from socnav_eval.clustering import (
    ari,
    best_k,
    cumulative_ari,
    feature_matrix,
    kmeans,
    partition_from_labels,
    silhouette,
    silhouette_by_k,
    subset_search,
)
from socnav_eval.core import HM_NAMES, Pose2D, TimedState, Trajectory, rigid_transform_record
from socnav_eval.dataset import load_dataset, load_survey
from socnav_eval.metrics import (
    METRIC_NAMES,
    SfmParams,
    align_record,
    compute_all,
    compute_metric_table,
    social_work,
)
from socnav_eval.pipeline import PipelineConfig, run_pipeline
from socnav_eval.preprocess import impute_hm_for_clustering, normalize_qm, scale_hm
from socnav_eval.rankstats import kendall, spearman
from socnav_eval.tables import MetricTable, NormalizedTable, RunKey

from conftest import make_record, straight_traj


def _finish(capsys, num: int, problems: list[str], detail: str) -> None:
    ok = not problems
    message = detail if ok else "; ".join(problems[:4])
    with capsys.disabled():
        print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {message}")
    assert ok, message


@pytest.fixture(scope="module")
def corpus_qm(corpus_records) -> MetricTable:
    return compute_metric_table(corpus_records)


# -- 1. rank statistics against brute-force oracles ---------------------------------


def _oracle_spearman(x: np.ndarray, y: np.ndarray) -> float:
    def midranks(v: np.ndarray) -> np.ndarray:
        less = (v[None, :] < v[:, None]).sum(axis=1)
        equal = (v[None, :] == v[:, None]).sum(axis=1)
        return less + (equal + 1) / 2.0
    rx, ry = midranks(x), midranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float((rx * ry).sum() / math.sqrt((rx * rx).sum() * (ry * ry).sum()))


def _oracle_kendall(x: np.ndarray, y: np.ndarray) -> float:
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    upper = np.triu_indices(len(x), k=1)
    sx, sy = sx[upper], sy[upper]
    conc = int(((sx * sy) > 0).sum())
    disc = int(((sx * sy) < 0).sum())
    ties_x_only = int(((sx == 0) & (sy != 0)).sum())
    ties_y_only = int(((sy == 0) & (sx != 0)).sum())
    return (conc - disc) / math.sqrt(
        (conc + disc + ties_y_only) * (conc + disc + ties_x_only))


def test_acceptance_1_rank_statistic_oracles(capsys):
    problems: list[str] = []
    rng = np.random.default_rng(12345)
    worst = 0.0
    t0 = time.perf_counter()
    try:
        checked = 0
        while checked < 1000:
            n = int(rng.integers(4, 201))
            x = rng.normal(size=n)
            y = 0.5 * x + rng.normal(size=n)
            if checked % 3 == 0:  # coarse rounding forces ties
                x, y = np.round(x), np.round(y)
                if len(set(x.tolist())) < 2 or len(set(y.tolist())) < 2:
                    continue
            rho, _ = spearman(x.tolist(), y.tolist())
            tau, _ = kendall(x.tolist(), y.tolist())
            d = max(abs(rho - _oracle_spearman(x, y)), abs(tau - _oracle_kendall(x, y)))
            worst = max(worst, d)
            if d > 1e-9:
                problems.append(f"pair {checked} (n={n}) off by {d:.2e}")
                break
            checked += 1
        elapsed = time.perf_counter() - t0
        if elapsed >= 10.0:
            problems.append(f"took {elapsed:.1f}s (limit 10s)")
    except Exception as exc:  # pragma: no cover - reported via the FAIL line
        problems.append(f"unexpected error: {exc!r}")
        elapsed = time.perf_counter() - t0
    _finish(capsys, 1, problems,
            f"1000 random pairs vs brute force, max |diff| {worst:.2e}, {elapsed:.1f}s")


# -- 2. adjusted Rand index against exhaustive pair counting ------------------------


def _oracle_ari(la, lb) -> Fraction | None:
    n = len(la)
    a11 = a10 = a01 = a00 = 0
    for i, j in itertools.combinations(range(n), 2):
        same_a = la[i] == la[j]
        same_b = lb[i] == lb[j]
        a11 += same_a and same_b
        a10 += same_a and not same_b
        a01 += same_b and not same_a
        a00 += not same_a and not same_b
    den = (a11 + a10) * (a10 + a00) + (a11 + a01) * (a01 + a00)
    if den == 0:
        return None  # degenerate: both partitions trivial
    return Fraction(2 * (a11 * a00 - a10 * a01), den)


def test_acceptance_2_ari_oracle(capsys):
    problems: list[str] = []
    rng = np.random.default_rng(99)
    try:
        hand = ari(partition_from_labels([0, 0, 1, 1]),
                   partition_from_labels([0, 1, 0, 1]))
        if hand != -0.5:
            problems.append(f"hand case gave {hand}, expected -0.5")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for trial in range(500):
                n = int(rng.integers(2, 13))
                la = partition_from_labels(rng.integers(0, 4, size=n).tolist())
                lb = partition_from_labels(rng.integers(0, 4, size=n).tolist())
                got = ari(la, lb)
                expected = _oracle_ari(la.labels, lb.labels)
                if expected is None:
                    if got != 1.0:
                        problems.append(f"trial {trial}: trivial pair gave {got}")
                        break
                elif abs(got - float(expected)) > 1e-12:
                    problems.append(f"trial {trial}: {got} vs {float(expected)}")
                    break
    except Exception as exc:
        problems.append(f"unexpected error: {exc!r}")
    _finish(capsys, 2, problems,
            "500 random partition pairs match exhaustive pair counting; "
            "[0,0,1,1] vs [0,1,0,1] -> -0.5")


# -- 3. clustering invariants over seeded random datasets ---------------------------


def _direct_silhouette(points: np.ndarray, labels: list[int], k: int) -> float:
    n = len(points)
    dist = [[math.dist(points[i], points[j]) for j in range(n)] for i in range(n)]
    total = 0.0
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            continue
        a = sum(dist[i][j] for j in own) / len(own)
        b = min(sum(dist[i][j] for j in range(n) if labels[j] == lab)
                / sum(1 for j in range(n) if labels[j] == lab)
                for lab in range(k) if lab != labels[i])
        total += (b - a) / max(a, b)
    return total / n


def test_acceptance_3_clustering_invariants(capsys):
    problems: list[str] = []
    rng = np.random.default_rng(7)
    try:
        for trial in range(200):
            n = int(rng.integers(6, 40))
            f = int(rng.integers(1, 5))
            k = int(rng.integers(2, min(6, n)))
            pts = rng.uniform(size=(n, f))
            part = kmeans(pts, k=k, seed=trial, restarts=2)
            hist = part.inertia_history
            if any(h1 > h0 * (1 + 1e-12) + 1e-12 for h0, h1 in zip(hist, hist[1:])):
                problems.append(f"trial {trial}: inertia increased {hist}")
                break
            sil = silhouette(pts, part)
            ref = _direct_silhouette(pts, list(part.labels), part.k)
            if abs(sil - ref) > 1e-9:
                problems.append(f"trial {trial}: silhouette {sil} vs direct {ref}")
                break
            if ari(part, part) != 1.0:
                problems.append(f"trial {trial}: ari(p,p) != 1")
                break
            perm = rng.permutation(part.k)
            relabeled = partition_from_labels([int(perm[lab]) for lab in part.labels])
            other = partition_from_labels(rng.integers(0, 3, size=n).tolist())
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                if ari(part, relabeled) != 1.0 or ari(part, other) != ari(relabeled, other):
                    problems.append(f"trial {trial}: not label-permutation invariant")
                    break
    except Exception as exc:
        problems.append(f"unexpected error: {exc!r}")
    _finish(capsys, 3, problems,
            "200 seeded datasets: monotone inertia, silhouette == direct "
            "recomputation, ARI self/permutation invariants")


# -- 4. subset-search combinatorics --------------------------------------------------


def test_acceptance_4_subset_search_combinatorics(capsys):
    problems: list[str] = []
    rng = np.random.default_rng(21)
    try:
        n = 12
        keys = [RunKey(f"r{i}", "a" if i < 6 else "b", i % 6 + 1) for i in range(n)]
        full = NormalizedTable(keys=keys, kind="qm", columns={
            name: rng.uniform(size=n).tolist() for name in METRIC_NAMES})
        truth = partition_from_labels((rng.integers(0, 2, size=n) + [0, 1] * (n // 2))
                                      .tolist())  # guaranteed two clusters
        results = subset_search(full, truth, k=2, seed=42, restarts=1)
        if len(results) != 2047:
            problems.append(f"11 columns gave {len(results)} subsets, expected 2047")
        sizes = sorted(len(r.metrics) for r in results)
        if sizes[0] != 1 or sizes[-1] != len(METRIC_NAMES):
            problems.append("subset sizes do not span 1..11")

        toy = NormalizedTable(keys=keys[:10], kind="qm", columns={
            name: rng.uniform(size=10).tolist() for name in ("TTG", "PL", "ARV", "AMD")})
        toy_truth = partition_from_labels([0, 1] * 5)
        toy_results = subset_search(toy, toy_truth, k=2, seed=42, restarts=2)
        if len(toy_results) != 15:
            problems.append(f"4 columns gave {len(toy_results)} subsets, expected 15")
        scripted = {}
        for res in toy_results:
            for name in res.metrics:
                scripted[name] = scripted.get(name, 0.0) + res.ari
        if dict(cumulative_ari(toy_results)) != scripted:
            problems.append("cumulative ARI differs from scripted summation")
    except Exception as exc:
        problems.append(f"unexpected error: {exc!r}")
    _finish(capsys, 4, problems,
            "11 columns -> 2047 subsets; 4-metric cumulative ARI equals "
            "scripted summation exactly")


# -- 5. metric engine properties on the synthetic corpus -----------------------------


def _radially_shifted(rec, shift: float, dt: float = 0.05):
    """Rebuild the record on the analysis grid, once as-is and once with every
    agent pushed ``shift`` metres straight away from the robot at each step."""
    aligned = align_record(rec, dt)
    robot = aligned.robot

    def rebuild(offset: float):
        agents = []
        for steps in aligned.agents:
            states = []
            for k, st in enumerate(steps):
                if st is None:
                    continue
                r = robot.states[k].pose
                dx, dy = st.pose.x - r.x, st.pose.y - r.y
                d = math.hypot(dx, dy)
                states.append(TimedState(
                    t=st.t,
                    pose=Pose2D(st.pose.x + offset * dx / d, st.pose.y + offset * dy / d,
                                st.pose.theta),
                    v_lin=st.v_lin, v_ang=st.v_ang))
            if len(states) >= 2:
                agents.append(Trajectory(states=tuple(states), subject_id="p",
                                         subject_kind="human"))
        return make_record(robot, tuple(agents), obstacle_map=rec.map)

    return rebuild(0.0), rebuild(shift)


def test_acceptance_5_metric_engine_properties(capsys, corpus_records, corpus_qm):
    problems: list[str] = []
    t0 = time.perf_counter()
    try:
        if len(corpus_records) < 20:
            problems.append(f"corpus has {len(corpus_records)} runs, need >= 20")
        cols = corpus_qm.columns
        for i, key in enumerate(corpus_qm.keys):
            total = cols["PR_I"][i] + cols["PR_PE"][i] + cols["PR_S"][i] + cols["PR_PU"][i]
            if abs(total - 100.0) > 1e-6:
                problems.append(f"{key.experiment_id}: proxemics sum {total}")
                break

        by_id = {k.experiment_id: i for i, k in enumerate(corpus_qm.keys)}
        for rec in corpus_records:
            moved = rigid_transform_record(rec, angle=0.83, dx=-3.1, dy=4.6)
            after = compute_all(moved).as_dict()
            i = by_id[rec.experiment_id]
            for name in METRIC_NAMES:
                base_v = cols[name][i]
                if base_v is None:
                    ok = after[name] is None
                else:
                    ok = after[name] is not None and abs(after[name] - base_v) <= 1e-6
                if not ok:
                    problems.append(
                        f"{rec.experiment_id}/{name}: {base_v} -> {after[name]}")
                    break
            if problems:
                break

        for rec in corpus_records:
            base_rec, shifted_rec = _radially_shifted(rec, 0.4)
            sw_base, _ = social_work(base_rec)
            sw_shift, _ = social_work(shifted_rec)
            if sw_base == 0.0:
                if sw_shift != 0.0:
                    problems.append(f"{rec.experiment_id}: SW appeared after shifting apart")
                    break
            elif not sw_shift < sw_base:
                problems.append(
                    f"{rec.experiment_id}: SW {sw_base:.4f} -> {sw_shift:.4f} not lower")
                break

        d, duration = 1.2, 4.0
        walkers = make_record(
            straight_traj((0, 0), 0.0, 0.5, duration),
            (straight_traj((0, d), 0.0, 0.5, duration, subject_id="p1",
                           subject_kind="human"),))
        params = SfmParams()
        sw, _ = social_work(walkers, params=params)
        lam = params.anisotropy
        expected = (params.force_strength_social
                    * math.exp((2 * params.agent_radius - d) / params.force_range_social)
                    * (1.0 + lam) * duration)
        if abs(sw - expected) / expected > 0.005:
            problems.append(f"constant-distance SW {sw:.6f} vs closed form {expected:.6f}")

        elapsed = time.perf_counter() - t0
        if elapsed >= 30.0:
            problems.append(f"took {elapsed:.1f}s (limit 30s)")
    except Exception as exc:
        problems.append(f"unexpected error: {exc!r}")
        elapsed = time.perf_counter() - t0
    _finish(capsys, 5, problems,
            f"{len(corpus_records)} corpus runs: proxemics sums, rigid-transform "
            f"invariance, SW monotonicity, closed-form SW ({elapsed:.1f}s)")


# -- 6. normalization contract --------------------------------------------------------


def test_acceptance_6_normalization_contract(capsys, corpus_qm):
    problems: list[str] = []
    rng = np.random.default_rng(31)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            norm = normalize_qm(corpus_qm)
        scenarios: dict[str, list[int]] = {}
        for i, key in enumerate(norm.keys):
            scenarios.setdefault(key.scenario_id, []).append(i)
        for name, col in norm.columns.items():
            for scenario, idxs in scenarios.items():
                present = [col[i] for i in idxs if col[i] is not None]
                if present and max(present) != 1.0:
                    problems.append(f"{name}/{scenario}: best score {max(present)}")

        keys = [RunKey(f"r{i}", "s", i + 1) for i in range(3)]
        table = MetricTable(keys=keys, columns={"TTG": [10.0, 12.5, 20.0]})
        scored = normalize_qm(table, {"TTG": "lower"}).columns["TTG"]
        if scored != [1.0, 0.8, 0.5]:
            problems.append(f"{{10, 12.5, 20}} scored {scored}")

        base_vals = (rng.uniform(0.5, 9.0, size=6)).tolist()
        keys6 = [RunKey(f"r{i}", "s1" if i < 3 else "s2", i % 3 + 1) for i in range(6)]
        for direction in ("lower", "higher"):
            base_scores = normalize_qm(
                MetricTable(keys=keys6, columns={"PL": list(base_vals)}),
                {"PL": direction}).columns["PL"]
            for _ in range(25):
                c = float(rng.uniform(0.01, 100.0))
                scaled = normalize_qm(
                    MetricTable(keys=keys6, columns={"PL": [v * c for v in base_vals]}),
                    {"PL": direction}).columns["PL"]
                if any(abs(a - b) > 1e-12 for a, b in zip(base_scores, scaled)):
                    problems.append(f"not scale-invariant under x{c:.3f} ({direction})")
                    break
    except Exception as exc:
        problems.append(f"unexpected error: {exc!r}")
    _finish(capsys, 6, problems,
            "best run scores exactly 1.0 per scenario/metric; {10,12.5,20} -> "
            "{1.0,0.8,0.5}; scale-invariant under 50 random column scalings")


# -- 7. pipeline determinism -----------------------------------------------------------


def test_acceptance_7_pipeline_determinism(capsys, corpus_dir, tmp_path):
    problems: list[str] = []
    t0 = time.perf_counter()
    try:
        cfg = PipelineConfig(data_dir=str(corpus_dir),
                             survey_path=str(corpus_dir / "survey.csv"))
        outs = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for label in ("first", "second"):
                out = tmp_path / label
                run_pipeline(cfg, out)
                outs.append(out)
        elapsed = time.perf_counter() - t0
        names = sorted(p.name for p in outs[0].iterdir())
        if names != sorted(p.name for p in outs[1].iterdir()):
            problems.append("runs produced different file sets")
        for name in names:
            if (outs[0] / name).read_bytes() != (outs[1] / name).read_bytes():
                problems.append(f"{name} differs between runs")
        if elapsed >= 60.0:
            problems.append(f"two runs took {elapsed:.1f}s (limit 60s)")
    except Exception as exc:
        problems.append(f"unexpected error: {exc!r}")
        elapsed = time.perf_counter() - t0
        names = []
    _finish(capsys, 7, problems,
            f"two identical-seed runs byte-identical across {len(names)} files "
            f"({elapsed:.1f}s)")


# -- 8. conditional reproduction on a converted reference dataset ----------------------

REFERENCE_DATASET_ENV = "SOCNAV_REFERENCE_DATASET"
REFERENCE_TOP_SUBSET = frozenset({"ARV", "SW_s", "PR_I", "PR_PE", "AMD"})
REFERENCE_TOP_CUMULATIVE = frozenset({"PR_I", "AMD", "PR_PE", "ARV", "TTG"})


def test_acceptance_8_reference_dataset_reproduction(capsys):
    root = os.environ.get(REFERENCE_DATASET_ENV)
    if not root:
        with capsys.disabled():
            print(f"\nACCEPTANCE 8: SKIP - set {REFERENCE_DATASET_ENV} to a directory of "
                  "converted experiment JSON plus survey.csv to enable the "
                  "reference-dataset checks")
        pytest.skip(f"{REFERENCE_DATASET_ENV} not set")
    problems: list[str] = []
    try:
        data = Path(root)
        records = load_dataset(data)
        survey = load_survey(data / "survey.csv")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            qm_raw = compute_metric_table(records)
            qm_norm = normalize_qm(qm_raw)
            hm_norm = scale_hm(survey, qm_raw.keys)
            hm_full = impute_hm_for_clustering(hm_norm)
            hm_matrix = feature_matrix(hm_full, list(HM_NAMES))
            grid = silhouette_by_k(hm_matrix, [2, 3], seed=42, restarts=10)

            for k, target in ((2, 0.548), (3, 0.435)):
                sil = grid[k][1]
                if abs(sil - target) > 0.02:
                    problems.append(f"HM silhouette K={k}: {sil:.3f} vs {target}+-0.02")

            complete = [c for c in qm_norm.columns
                        if all(v is not None for v in qm_norm.columns[c])]
            hm_part = grid[2][0]
            if len(complete) == len(METRIC_NAMES):
                all_qm = kmeans(feature_matrix(qm_norm, complete), k=2, seed=42,
                                restarts=10)
                initial = ari(all_qm, hm_part)
                if abs(initial - (-0.04)) > 0.05:
                    problems.append(f"all-11-QM ARI {initial:.3f} vs -0.04+-0.05")
            else:
                problems.append(f"only {len(complete)} complete QM columns; "
                                "cannot score the all-11 set")

            results = subset_search(qm_norm, hm_part, k=2, seed=42, restarts=10,
                                    columns=complete)
            top3 = results[:3]
            match = [r for r in top3 if frozenset(r.metrics) == REFERENCE_TOP_SUBSET]
            if not match:
                problems.append(
                    "reference subset ARV+SW_s+PR_I+PR_PE+AMD not in top-3 "
                    f"(top: {[r.joined for r in top3]})")
            elif abs(match[0].ari - 0.54) > 0.05:
                problems.append(f"reference subset ARI {match[0].ari:.3f} vs 0.54+-0.05")

            cumulative = cumulative_ari(results)
            top5 = {name for name, _ in cumulative[:5]}
            overlap = len(top5 & REFERENCE_TOP_CUMULATIVE)
            if overlap < 4:
                problems.append(f"top-5 cumulative ARI {sorted(top5)} shares only "
                                f"{overlap} with the reference five")

            rows = build_aggregate_rows(qm_norm, hm_norm, optimal_set_spec())
            trend = trend_agreement(rows)
            if trend.best_fraction_optimal < trend.best_fraction_full:
                problems.append(
                    f"optimal-set best-run agreement {trend.best_fraction_optimal:.2f} "
                    f"< full-set {trend.best_fraction_full:.2f}")
    except Exception as exc:
        problems.append(f"unexpected error: {exc!r}")
    _finish(capsys, 8, problems,
            "reference dataset: silhouettes, subset ARI, cumulative ranking, and "
            "trend agreement all within the frozen reference tolerances")
