from __future__ import annotations

import numpy as np
import pytest

from socnav_eval.aggregate import (
    DEFAULT_OPTIMAL_SET,
    AggregateRow,
    MetricSetSpec,
    affine_fit,
    aggregate,
    aggregate_hm,
    build_aggregate_rows,
    full_set_spec,
    optimal_set_spec,
    trend_agreement,
)
from socnav_eval.metrics import METRIC_NAMES
from socnav_eval.tables import NormalizedTable, RunKey


def _keys(pairs):
    return [RunKey(f"{s}_{r:02d}", s, r) for s, r in pairs]


def test_metric_set_spec_validation():
    MetricSetSpec(name="ok", members=("TTG", "PL"))
    with pytest.raises(ValueError):
        MetricSetSpec(name="empty", members=())
    with pytest.raises(ValueError):
        MetricSetSpec(name="bad", members=("TTG", "XYZ"))
    with pytest.raises(ValueError):
        MetricSetSpec(name="dup", members=("TTG", "TTG"))
    assert optimal_set_spec().members == DEFAULT_OPTIMAL_SET
    assert full_set_spec().members == METRIC_NAMES
    assert all(m in METRIC_NAMES for m in DEFAULT_OPTIMAL_SET)


def test_aggregate_plain_mean():
    keys = _keys([("a", 1), ("a", 2)])
    table = NormalizedTable(keys=keys, kind="qm", columns={
        "TTG": [1.0, 0.5],
        "PL": [0.8, 0.6],
        "ARV": [0.6, 1.0],
    })
    spec = MetricSetSpec(name="pair", members=("TTG", "ARV"))
    assert aggregate(table, spec) == [pytest.approx(0.8), pytest.approx(0.75)]


def test_aggregate_skips_missing_cells():
    keys = _keys([("a", 1), ("a", 2)])
    table = NormalizedTable(keys=keys, kind="qm", columns={
        "TTG": [1.0, 0.5],
        "AMD": [None, 0.7],
    })
    spec = MetricSetSpec(name="pair", members=("TTG", "AMD"))
    # run 1 averages over the single present member
    assert aggregate(table, spec) == [pytest.approx(1.0), pytest.approx(0.6)]


def test_aggregate_error_cases():
    keys = _keys([("a", 1)])
    table = NormalizedTable(keys=keys, kind="qm", columns={"TTG": [None]})
    with pytest.raises(ValueError, match="no values"):
        aggregate(table, MetricSetSpec(name="one", members=("TTG",)))
    with pytest.raises(ValueError, match="shares no columns"):
        aggregate(table, MetricSetSpec(name="other", members=("PL",)))


def test_aggregate_hm_means_and_stds():
    keys = _keys([("a", 1), ("a", 2)])
    hm = NormalizedTable(keys=keys, kind="hm",
                         columns={"friendliness": [0.8, None], "smoothness": [0.6, None]},
                         stds={"friendliness": [0.2, None], "smoothness": [0.1, None]})
    means, stds = aggregate_hm(hm)
    assert means == [pytest.approx(0.7), None]
    assert stds == [pytest.approx(0.15), None]


def test_aggregate_row_bounds():
    with pytest.raises(ValueError):
        AggregateRow(experiment_id="x", scenario_id="a", run_index=1,
                     hm_mean=1.2, hm_std=0.1, qm_full=0.5, qm_optimal=0.5)
    with pytest.raises(ValueError):
        AggregateRow(experiment_id="x", scenario_id="a", run_index=1,
                     hm_mean=0.5, hm_std=-0.1, qm_full=0.5, qm_optimal=0.5)


def _rows_table():
    keys = _keys([("a", 1), ("a", 2), ("b", 1), ("b", 2)])
    cols = {name: [0.9, 0.4, 0.8, 0.3] for name in METRIC_NAMES}
    qm = NormalizedTable(keys=keys, kind="qm", columns=cols)
    hm = NormalizedTable(keys=keys, kind="hm",
                         columns={"friendliness": [0.9, 0.5, 0.8, 0.4]},
                         stds={"friendliness": [0.1, 0.1, 0.1, 0.1]})
    return qm, hm


def test_build_aggregate_rows():
    qm, hm = _rows_table()
    rows = build_aggregate_rows(qm, hm)
    assert [r.experiment_id for r in rows] == [k.experiment_id for k in qm.keys]
    assert rows[0].qm_full == pytest.approx(0.9)
    assert rows[0].qm_optimal == pytest.approx(0.9)
    assert rows[0].hm_mean == pytest.approx(0.9)
    without_hm = build_aggregate_rows(qm, None)
    assert all(r.hm_mean is None for r in without_hm)


def test_build_aggregate_rows_key_mismatch():
    qm, _ = _rows_table()
    other = NormalizedTable(keys=_keys([("z", 1), ("z", 2), ("z", 3), ("z", 4)]),
                            kind="hm", columns={"friendliness": [0.1, 0.2, 0.3, 0.4]})
    with pytest.raises(ValueError, match="same experiments"):
        build_aggregate_rows(qm, other)


def _row(eid, scen, run, hm, full, opt):
    return AggregateRow(experiment_id=eid, scenario_id=scen, run_index=run,
                        hm_mean=hm, hm_std=0.1 if hm is not None else None,
                        qm_full=full, qm_optimal=opt)


def test_trend_agreement_perfect():
    rows = [
        _row("a_1", "a", 1, 0.9, 0.9, 0.8),
        _row("a_2", "a", 2, 0.6, 0.7, 0.6),
        _row("a_3", "a", 3, 0.3, 0.2, 0.1),
    ]
    report = trend_agreement(rows)
    trend = report.scenarios[0]
    assert trend.n_runs == 3
    assert trend.tau_full == 1.0 and trend.tau_optimal == 1.0
    assert trend.best_match_full and trend.worst_match_optimal
    assert report.best_fraction_full == 1.0
    assert report.mean_tau_full == 1.0


def test_trend_agreement_disagreement_and_ties():
    rows = [
        # survey ranks run1 best; full metric ranks run2 best -> mismatch
        _row("a_1", "a", 1, 0.9, 0.4, 0.9),
        _row("a_2", "a", 2, 0.5, 0.8, 0.5),
        # scenario with a constant QM column -> tau None but matches via ties
        _row("b_1", "b", 1, 0.9, 0.5, 0.5),
        _row("b_2", "b", 2, 0.4, 0.5, 0.5),
    ]
    report = trend_agreement(rows)
    by_id = {t.scenario_id: t for t in report.scenarios}
    assert by_id["a"].tau_full == -1.0
    assert by_id["a"].best_match_full is False
    assert by_id["a"].best_match_optimal is True
    assert by_id["b"].tau_full is None
    # a tied QM column intersects both best and worst argsets
    assert by_id["b"].best_match_full and by_id["b"].worst_match_full
    assert report.best_fraction_full == pytest.approx(0.5)
    assert report.mean_tau_full == pytest.approx(-1.0)  # only scenario a counted


def test_trend_agreement_skips_and_errors():
    lone = [_row("a_1", "a", 1, 0.9, 0.5, 0.5)]
    with pytest.raises(ValueError, match="no scenario"):
        with pytest.warns(UserWarning, match="1 run"):
            trend_agreement(lone)
    unsurveyed = [
        _row("a_1", "a", 1, None, 0.5, 0.5),
        _row("a_2", "a", 2, None, 0.6, 0.6),
        _row("b_1", "b", 1, 0.8, 0.5, 0.5),
        _row("b_2", "b", 2, 0.3, 0.2, 0.2),
    ]
    with pytest.warns(UserWarning, match="lacks survey"):
        report = trend_agreement(unsurveyed)
    assert len(report.scenarios) == 1
    assert report.scenarios[0].scenario_id == "b"


def test_trend_uses_run_index_order():
    # rows supplied out of order must not change the per-scenario statistics
    rows = [
        _row("a_3", "a", 3, 0.3, 0.2, 0.1),
        _row("a_1", "a", 1, 0.9, 0.9, 0.8),
        _row("a_2", "a", 2, 0.6, 0.7, 0.6),
    ]
    assert trend_agreement(rows).scenarios[0].tau_full == 1.0


def test_affine_fit_exact_line():
    qm = [0.1, 0.4, 0.7, 1.0]
    hm = [0.3, 0.45, 0.6, 0.75]  # 0.5 * x + 0.25
    fit = affine_fit(qm, hm)
    assert fit is not None
    assert fit[0] == pytest.approx(0.5)
    assert fit[1] == pytest.approx(0.25)


def test_affine_fit_least_squares_matches_numpy():
    rng = np.random.default_rng(6)
    qm = rng.uniform(0, 1, size=20).tolist()
    hm = (0.3 * np.array(qm) + 0.2 + rng.normal(scale=0.05, size=20)).tolist()
    slope, intercept = affine_fit(qm, hm)
    ref_slope, ref_intercept = np.polyfit(qm, hm, 1)
    assert slope == pytest.approx(ref_slope, abs=1e-9)
    assert intercept == pytest.approx(ref_intercept, abs=1e-9)


def test_affine_fit_degenerate():
    assert affine_fit([0.5], [0.5]) is None
    assert affine_fit([0.5, 0.5, 0.5], [0.1, 0.2, 0.3]) is None
    assert affine_fit([0.1, 0.9], [None, None]) is None
