"""End-to-end orchestration: load, measure, normalize, cluster, correlate,
aggregate, render, and record how it was all produced.

Every output is written to a staging directory first and moved into place
only when the whole run succeeds, so a failing stage leaves no partial files.
A manifest (config hash, seed, library versions, diagnostics) makes reruns
reproducible; with a fixed seed the CSV outputs are byte-identical.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import shutil
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import matplotlib
import numpy as np
import scipy

from . import __version__
from .aggregate import (
    AggregateRow,
    DEFAULT_OPTIMAL_SET,
    TrendReport,
    affine_fit,
    build_aggregate_rows,
    optimal_set_spec,
    trend_agreement,
)
from .clustering import (
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    Partition,
    SubsetResult,
    ari,
    best_k,
    cumulative_ari,
    feature_matrix,
    kmeans,
    silhouette_by_k,
    subset_search,
)
from .core import HM_NAMES, SurveyTable
from .dataset import load_dataset, load_survey
from .metrics import METRIC_NAMES, ProxemicsThresholds, SfmParams, compute_metric_table
from .preprocess import (
    NORM_METHODS,
    default_directions,
    directions_with_overrides,
    impute_hm_for_clustering,
    normalize_qm,
    scale_hm,
)
from .rankstats import CorrelationEntry, Thresholds, consistent_correlations
from .tables import NormalizedTable, fmt_cell, write_rows_csv, write_table_csv

OUTPUT_GROUPS = ("metrics", "normalize", "cluster", "correlate", "aggregate",
                 "figures", "manifest")


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and original cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved settings for one pipeline run."""

    data_dir: str = "data"
    survey_path: str | None = None
    strict: bool = False
    dt: float = 0.05
    sfm: SfmParams = field(default_factory=SfmParams)
    proxemics: ProxemicsThresholds = field(default_factory=ProxemicsThresholds)
    sw_raw_sum: bool = False
    directions: tuple[tuple[str, str], ...] = tuple(default_directions().items())
    norm_method: str = "ratio"
    search_ks: tuple[int, ...] = (2, 3)
    k_grid: tuple[int, ...] = (2, 3, 4, 5)
    seed: int = DEFAULT_SEED
    restarts: int = DEFAULT_RESTARTS
    thresholds: Thresholds = field(default_factory=Thresholds)
    optimal_set: tuple[str, ...] = DEFAULT_OPTIMAL_SET

    def direction_map(self) -> dict[str, str]:
        return dict(self.directions)

    def to_dict(self) -> dict:
        return {
            "data_dir": self.data_dir,
            "survey_path": self.survey_path,
            "strict": self.strict,
            "dt": self.dt,
            "sfm": {
                "force_strength_social": self.sfm.force_strength_social,
                "force_range_social": self.sfm.force_range_social,
                "agent_radius": self.sfm.agent_radius,
                "anisotropy": self.sfm.anisotropy,
                "force_strength_obstacle": self.sfm.force_strength_obstacle,
                "force_range_obstacle": self.sfm.force_range_obstacle,
                "interaction_cutoff": self.sfm.interaction_cutoff,
            },
            "proxemics": {
                "intimate_max": self.proxemics.intimate_max,
                "personal_max": self.proxemics.personal_max,
                "social_max": self.proxemics.social_max,
            },
            "sw_raw_sum": self.sw_raw_sum,
            "directions": dict(self.directions),
            "norm_method": self.norm_method,
            "search_ks": list(self.search_ks),
            "k_grid": list(self.k_grid),
            "seed": self.seed,
            "restarts": self.restarts,
            "thresholds": {
                "rho_min": self.thresholds.rho_min,
                "tau_min": self.thresholds.tau_min,
                "p_max_rho": self.thresholds.p_max_rho,
                "p_max_tau": self.thresholds.p_max_tau,
            },
            "optimal_set": list(self.optimal_set),
        }

    def sha256(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


def _section(parser: configparser.ConfigParser, name: str, allowed: set[str]) -> dict[str, str]:
    if not parser.has_section(name):
        return {}
    items = dict(parser.items(name))
    unknown = set(items) - allowed
    if unknown:
        raise ValueError(f"config section [{name}] has unknown key(s) {sorted(unknown)}")
    return items


def _get_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.replace(" ", "").split(",") if part)


def load_config(path: str | Path) -> PipelineConfig:
    """Read an INI-style config; missing sections and keys keep defaults."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # type: ignore[assignment]  # metric names are case-sensitive
    read = parser.read(str(path))
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")

    ds = _section(parser, "dataset", {"dir", "survey", "strict", "dt"})
    sfm_kv = _section(parser, "sfm", {"strength", "range", "radius", "anisotropy",
                                      "obstacle_strength", "obstacle_range", "cutoff",
                                      "raw_sum"})
    prox = _section(parser, "proxemics", {"intimate", "personal", "social"})
    direction = _section(parser, "direction", set(METRIC_NAMES))
    cluster = _section(parser, "cluster", {"search_k", "k_grid", "seed", "restarts"})
    stats = _section(parser, "stats", {"rho_min", "tau_min", "p_max_rho", "p_max_tau"})
    agg = _section(parser, "aggregate", {"optimal", "norm"})

    defaults = PipelineConfig()
    sfm = SfmParams(
        force_strength_social=float(sfm_kv.get("strength", defaults.sfm.force_strength_social)),
        force_range_social=float(sfm_kv.get("range", defaults.sfm.force_range_social)),
        agent_radius=float(sfm_kv.get("radius", defaults.sfm.agent_radius)),
        anisotropy=float(sfm_kv.get("anisotropy", defaults.sfm.anisotropy)),
        force_strength_obstacle=float(sfm_kv.get("obstacle_strength",
                                                 defaults.sfm.force_strength_obstacle)),
        force_range_obstacle=float(sfm_kv.get("obstacle_range",
                                              defaults.sfm.force_range_obstacle)),
        interaction_cutoff=float(sfm_kv.get("cutoff", defaults.sfm.interaction_cutoff)),
    )
    thresholds = Thresholds(
        rho_min=float(stats.get("rho_min", 0.4)),
        tau_min=float(stats.get("tau_min", 0.25)),
        p_max_rho=float(stats.get("p_max_rho", 0.05)),
        p_max_tau=float(stats.get("p_max_tau", 0.05)),
    )
    optimal = tuple(agg["optimal"].replace(" ", "").split(",")) if "optimal" in agg \
        else DEFAULT_OPTIMAL_SET
    return PipelineConfig(
        data_dir=ds.get("dir", defaults.data_dir),
        survey_path=ds.get("survey"),
        strict=_get_bool(ds["strict"]) if "strict" in ds else False,
        dt=float(ds.get("dt", defaults.dt)),
        sfm=sfm,
        proxemics=ProxemicsThresholds(
            intimate_max=float(prox.get("intimate", 0.45)),
            personal_max=float(prox.get("personal", 1.2)),
            social_max=float(prox.get("social", 3.6)),
        ),
        sw_raw_sum=_get_bool(sfm_kv["raw_sum"]) if "raw_sum" in sfm_kv else False,
        directions=tuple(directions_with_overrides(direction).items()),
        norm_method=agg.get("norm", "ratio"),
        search_ks=_int_list(cluster["search_k"]) if "search_k" in cluster else (2, 3),
        k_grid=_int_list(cluster["k_grid"]) if "k_grid" in cluster else (2, 3, 4, 5),
        seed=int(cluster.get("seed", DEFAULT_SEED)),
        restarts=int(cluster.get("restarts", DEFAULT_RESTARTS)),
        thresholds=thresholds,
        optimal_set=optimal,
    )


def apply_overrides(cfg: PipelineConfig, *, data_dir: str | None = None,
                    survey_path: str | None = None, seed: int | None = None,
                    search_ks: tuple[int, ...] | None = None,
                    norm_method: str | None = None, restarts: int | None = None,
                    sw_raw_sum: bool | None = None) -> PipelineConfig:
    """Command-line flags win over config-file values."""
    updates: dict = {}
    if data_dir is not None:
        updates["data_dir"] = data_dir
    if survey_path is not None:
        updates["survey_path"] = survey_path
    if seed is not None:
        updates["seed"] = seed
    if search_ks is not None:
        updates["search_ks"] = search_ks
    if norm_method is not None:
        if norm_method not in NORM_METHODS:
            raise ValueError(f"norm must be one of {NORM_METHODS}, got '{norm_method}'")
        updates["norm_method"] = norm_method
    if restarts is not None:
        updates["restarts"] = restarts
    if sw_raw_sum is not None:
        updates["sw_raw_sum"] = sw_raw_sum
    return replace(cfg, **updates) if updates else cfg


@dataclass
class PipelineResult:
    """Everything a run computed plus the files it wrote."""

    config: PipelineConfig
    out_dir: Path
    files: list[Path] = field(default_factory=list)
    qm_norm: NormalizedTable | None = None
    hm_norm: NormalizedTable | None = None
    silhouettes: dict[int, float] = field(default_factory=dict)
    chosen_k: int | None = None
    initial_ari: dict[int, float] = field(default_factory=dict)
    subset_results: dict[int, list[SubsetResult]] = field(default_factory=dict)
    cumulative: dict[str, list[tuple[str, float]]] = field(default_factory=dict)
    correlations: list[CorrelationEntry] = field(default_factory=list)
    aggregate_rows: list[AggregateRow] = field(default_factory=list)
    trend: TrendReport | None = None
    manifest: dict = field(default_factory=dict)


def _hm_table_columns(hm: NormalizedTable) -> dict[str, list[float | None]]:
    columns: dict[str, list[float | None]] = {}
    for name in HM_NAMES:
        columns[name] = hm.columns[name]
    if hm.stds is not None:
        for name in HM_NAMES:
            columns[f"{name}_std"] = hm.stds[name]
    return columns


def _write_subset_results(path: Path, results: dict[int, list[SubsetResult]]) -> None:
    rows = []
    for k in sorted(results):
        for res in results[k]:
            rows.append([res.joined, str(k), fmt_cell(res.ari)])
    write_rows_csv(path, ["subset", "k", "ari"], rows)


def _write_cumulative(path: Path, cumulative: dict[str, list[tuple[str, float]]]) -> None:
    rows = []
    for k in sorted(cumulative, key=str):
        for name, value in cumulative[k]:
            rows.append([name, str(k), fmt_cell(value)])
    write_rows_csv(path, ["metric", "k", "cumulative_ari"], rows)


def _write_correlations(path: Path, entries: list[CorrelationEntry]) -> None:
    rows = []
    for e in entries:
        rows.append([
            e.qm_name, e.hm_name, str(e.n), fmt_cell(e.rho), fmt_cell(e.p_rho),
            fmt_cell(e.tau), fmt_cell(e.p_tau), fmt_cell(e.strength),
            "1" if e.consistent else "0", e.note,
        ])
    write_rows_csv(path, ["qm", "hm", "n", "rho", "p_rho", "tau", "p_tau",
                          "strength", "consistent", "note"], rows)


def _write_heatmap(path: Path, entries: list[CorrelationEntry]) -> None:
    rows = [[e.qm_name, e.hm_name, fmt_cell(e.strength)]
            for e in entries if e.consistent]
    write_rows_csv(path, ["qm", "hm", "strength"], rows)


def _write_aggregates(path: Path, rows: list[AggregateRow]) -> None:
    out = []
    for r in rows:
        out.append([r.experiment_id, r.scenario_id, str(r.run_index),
                    fmt_cell(r.hm_mean), fmt_cell(r.hm_std),
                    fmt_cell(r.qm_full), fmt_cell(r.qm_optimal)])
    write_rows_csv(path, ["experiment_id", "scenario_id", "run_index",
                          "hm_mean", "hm_std", "qm_full", "qm_optimal"], out)


def _write_trend(path: Path, trend: TrendReport) -> None:
    rows = []
    for t in trend.scenarios:
        rows.append([
            t.scenario_id, str(t.n_runs), fmt_cell(t.tau_full), fmt_cell(t.tau_optimal),
            "1" if t.best_match_full else "0", "1" if t.best_match_optimal else "0",
            "1" if t.worst_match_full else "0", "1" if t.worst_match_optimal else "0",
        ])
    rows.append([
        "ALL", str(len(trend.scenarios)), fmt_cell(trend.mean_tau_full),
        fmt_cell(trend.mean_tau_optimal), fmt_cell(trend.best_fraction_full),
        fmt_cell(trend.best_fraction_optimal), fmt_cell(trend.worst_fraction_full),
        fmt_cell(trend.worst_fraction_optimal),
    ])
    write_rows_csv(path, ["scenario_id", "n_runs", "tau_full", "tau_optimal",
                          "best_match_full", "best_match_optimal",
                          "worst_match_full", "worst_match_optimal"], rows)


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path, qm_only: bool = False,
                 outputs: set[str] | None = None) -> PipelineResult:
    """Run the requested stages and move their outputs into ``out_dir``.

    ``outputs`` selects which file groups to write (default: all). With
    ``qm_only`` the survey-dependent stages (clustering, correlations, trends)
    are skipped entirely.
    """
    groups = set(OUTPUT_GROUPS) if outputs is None else set(outputs)
    unknown = groups - set(OUTPUT_GROUPS)
    if unknown:
        raise ValueError(f"unknown output group(s) {sorted(unknown)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = out_dir / ".staging"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir()
    result = PipelineResult(config=cfg, out_dir=out_dir)
    staged: list[str] = []

    def _run(stage: str, fn):
        try:
            return fn()
        except StageError:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        except BaseException as exc:
            shutil.rmtree(staging, ignore_errors=True)
            raise StageError(stage, exc) from exc

    try:
        # -- load ------------------------------------------------------------
        def _load() -> tuple[list, SurveyTable | None]:
            records = load_dataset(cfg.data_dir, strict=cfg.strict)
            if not records:
                raise ValueError(f"no experiment records in '{cfg.data_dir}'")
            survey = None
            if not qm_only:
                if cfg.survey_path is None:
                    raise ValueError("no survey path configured; pass --qm-only to "
                                     "run without human metrics")
                survey = load_survey(cfg.survey_path)
            return records, survey

        records, survey = _run("load", _load)

        # -- metrics -----------------------------------------------------------
        def _metrics():
            return compute_metric_table(records, params=cfg.sfm, thr=cfg.proxemics,
                                        dt=cfg.dt, raw_sum=cfg.sw_raw_sum)

        qm_raw = _run("metrics", _metrics)
        if "metrics" in groups:
            write_table_csv(staging / "metrics_raw.csv", qm_raw.keys, qm_raw.columns)
            staged.append("metrics_raw.csv")

        # -- normalize ---------------------------------------------------------
        def _normalize():
            qm_norm = normalize_qm(qm_raw, cfg.direction_map(), method=cfg.norm_method)
            hm_norm = scale_hm(survey, qm_raw.keys) if survey is not None else None
            return qm_norm, hm_norm

        qm_norm, hm_norm = _run("normalize", _normalize)
        result.qm_norm = qm_norm
        result.hm_norm = hm_norm
        if "normalize" in groups:
            write_table_csv(staging / "metrics_norm.csv", qm_norm.keys, qm_norm.columns)
            staged.append("metrics_norm.csv")
            if hm_norm is not None:
                write_table_csv(staging / "hm_norm.csv", hm_norm.keys,
                                _hm_table_columns(hm_norm))
                staged.append("hm_norm.csv")

        imputed_cells: list[tuple[str, str]] = []
        complete_cols = [c for c in qm_norm.columns
                         if all(v is not None for v in qm_norm.columns[c])]
        dropped_cols = [c for c in qm_norm.columns if c not in complete_cols]

        # -- cluster ----------------------------------------------------------
        need_cluster = bool(groups & {"cluster", "figures", "manifest"}) and not qm_only
        if need_cluster:
            def _cluster():
                hm_imputed = impute_hm_for_clustering(hm_norm)
                imputed_cells.extend(sorted(hm_imputed.imputed))
                hm_matrix = feature_matrix(hm_imputed, list(HM_NAMES))
                ids = tuple(k.experiment_id for k in qm_norm.keys)
                grid = silhouette_by_k(hm_matrix, list(cfg.k_grid), seed=cfg.seed,
                                       restarts=cfg.restarts, ids=ids)
                result.silhouettes = {k: s for k, (_, s) in grid.items()}
                result.chosen_k = best_k(grid)
                full_matrix = feature_matrix(qm_norm, complete_cols)
                for k in cfg.search_ks:
                    hm_part = grid[k][0] if k in grid else kmeans(
                        hm_matrix, k=k, seed=cfg.seed, restarts=cfg.restarts, ids=ids)
                    qm_part = kmeans(full_matrix, k=k, seed=cfg.seed,
                                     restarts=cfg.restarts, ids=ids)
                    result.initial_ari[k] = ari(qm_part, hm_part)
                    result.subset_results[k] = subset_search(
                        qm_norm, hm_part, k=k, seed=cfg.seed, restarts=cfg.restarts,
                        columns=complete_cols)
                    result.cumulative[str(k)] = cumulative_ari(result.subset_results[k])
                merged = [res for k in sorted(result.subset_results)
                          for res in result.subset_results[k]]
                result.cumulative["sum"] = cumulative_ari(merged)

            _run("cluster", _cluster)
            if "cluster" in groups:
                _write_subset_results(staging / "subset_results.csv", result.subset_results)
                _write_cumulative(staging / "cumulative_ari.csv", result.cumulative)
                staged.extend(["subset_results.csv", "cumulative_ari.csv"])

        # -- correlate ---------------------------------------------------------
        need_correlate = bool(groups & {"correlate", "figures", "manifest"}) and not qm_only
        if need_correlate:
            def _correlate():
                return consistent_correlations(qm_norm, hm_norm, cfg.thresholds)

            result.correlations = _run("correlate", _correlate)
            if "correlate" in groups:
                _write_correlations(staging / "correlations.csv", result.correlations)
                _write_heatmap(staging / "heatmap.csv", result.correlations)
                staged.extend(["correlations.csv", "heatmap.csv"])

        # -- aggregate ---------------------------------------------------------
        def _aggregate():
            rows = build_aggregate_rows(qm_norm, hm_norm,
                                        optimal_set_spec(cfg.optimal_set))
            trend = trend_agreement(rows) if hm_norm is not None else None
            return rows, trend

        rows, trend = _run("aggregate", _aggregate)
        result.aggregate_rows = rows
        result.trend = trend
        if "aggregate" in groups:
            _write_aggregates(staging / "aggregates.csv", rows)
            staged.append("aggregates.csv")
            if trend is not None:
                _write_trend(staging / "trend_report.csv", trend)
                staged.append("trend_report.csv")

        # -- figures ----------------------------------------------------------
        if "figures" in groups:
            def _figures():
                from .figures import emit_figures
                entries = result.correlations if not qm_only else None
                cum = result.cumulative.get("sum") if not qm_only else None
                return emit_figures(rows, entries, cum, staging)

            for fig_path in _run("figures", _figures):
                staged.append(fig_path.name)

        # -- manifest ----------------------------------------------------------
        if "manifest" in groups:
            def _manifest():
                fits = {}
                hm_scores = [r.hm_mean for r in rows]
                for label, scores in (("full", [r.qm_full for r in rows]),
                                      ("optimal", [r.qm_optimal for r in rows])):
                    fit = affine_fit(scores, hm_scores)
                    fits[label] = list(fit) if fit is not None else None
                return {
                    "chosen_k": result.chosen_k,
                    "config": cfg.to_dict(),
                    "config_sha256": cfg.sha256(),
                    "diagnostics": {
                        "affine_fit_qm_to_hm": fits,
                        "dropped_qm_columns": dropped_cols,
                        "hm_silhouettes": {str(k): v for k, v in result.silhouettes.items()},
                        "imputed_hm_cells": [list(c) for c in imputed_cells],
                        "initial_ari": {str(k): v for k, v in result.initial_ari.items()},
                        "searched_columns": complete_cols,
                    },
                    "n_records": len(records),
                    "outputs": sorted(staged + ["run_manifest.json"]),
                    "qm_only": qm_only,
                    "versions": {
                        "matplotlib": matplotlib.__version__,
                        "numpy": np.__version__,
                        "python": sys.version.split()[0],
                        "scipy": scipy.__version__,
                        "socnav_eval": __version__,
                    },
                }

            manifest = _run("manifest", _manifest)
            result.manifest = manifest
            with (staging / "run_manifest.json").open("w") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
                fh.write("\n")
            staged.append("run_manifest.json")

        for name in staged:
            os.replace(staging / name, out_dir / name)
            result.files.append(out_dir / name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return result
