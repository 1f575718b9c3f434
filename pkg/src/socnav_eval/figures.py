"""SVG renderings of the report tables.

Figures are derived views: every annotated value is a (rounded) value from the
CSV the figure sits next to. Rendering is deterministic — fixed hash salt, no
embedded dates, text kept as text so tests can extract it.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .aggregate import AggregateRow
from .core import HM_NAMES
from .metrics import METRIC_NAMES
from .rankstats import CorrelationEntry

SVG_RC = {
    "svg.fonttype": "none",
    "svg.hashsalt": "socnav-eval",
    "figure.dpi": 100,
}

_SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def _save(fig, path: Path) -> None:
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def aggregate_bar_figure(rows: list[AggregateRow], path: str | Path) -> Path:
    """Grouped bars per run: survey aggregate (with std error bar) next to the
    full and optimal quantitative aggregates."""
    path = Path(path)
    labels = [r.experiment_id for r in rows]
    x = np.arange(len(rows))
    with_hm = any(r.hm_mean is not None for r in rows)
    width = 0.26 if with_hm else 0.38
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(max(8.0, 0.45 * len(rows)), 4.0))
        offset = -width if with_hm else -width / 2
        if with_hm:
            hm = [r.hm_mean if r.hm_mean is not None else np.nan for r in rows]
            err = [r.hm_std if r.hm_std is not None else 0.0 for r in rows]
            ax.bar(x + offset, hm, width, yerr=err, capsize=2, label="survey",
                   color="#4878a8")
            offset += width
        ax.bar(x + offset, [r.qm_full for r in rows], width, label="all metrics",
               color="#e49444")
        ax.bar(x + offset + width, [r.qm_optimal for r in rows], width,
               label="optimal set", color="#6a9f58")
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
        ax.set_ylabel("aggregate score")
        ax.set_ylim(0.0, 1.15)
        ax.legend(ncol=3, fontsize=8, loc="upper right")
        ax.set_title("Per-run aggregate scores")
        fig.tight_layout()
        _save(fig, path)
    return path


def heatmap_figure(entries: list[CorrelationEntry], path: str | Path) -> Path:
    """Strength of the consistent QM-HM correlations; blank cells failed the
    strength or significance gates."""
    path = Path(path)
    grid = np.full((len(METRIC_NAMES), len(HM_NAMES)), np.nan)
    consistent = [e for e in entries if e.consistent]
    for e in consistent:
        if e.qm_name in METRIC_NAMES and e.hm_name in HM_NAMES:
            grid[METRIC_NAMES.index(e.qm_name), HM_NAMES.index(e.hm_name)] = e.strength
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.0, 6.5))
        masked = np.ma.masked_invalid(grid)
        cmap = plt.get_cmap("YlOrRd").copy()
        cmap.set_bad("#f0f0f0")
        im = ax.imshow(masked, cmap=cmap, vmin=0.0, vmax=1.0, aspect="auto")
        ax.set_xticks(range(len(HM_NAMES)))
        ax.set_xticklabels(HM_NAMES, rotation=30, ha="right", fontsize=8)
        ax.set_yticks(range(len(METRIC_NAMES)))
        ax.set_yticklabels(METRIC_NAMES, fontsize=8)
        for e in consistent:
            i = METRIC_NAMES.index(e.qm_name)
            j = HM_NAMES.index(e.hm_name)
            ax.text(j, i, f"{e.strength:.3f}", ha="center", va="center", fontsize=8)
        if not consistent:
            ax.text(0.5, 0.5, "no consistent correlations", transform=ax.transAxes,
                    ha="center", va="center", fontsize=11)
        fig.colorbar(im, ax=ax, label="mean |rho|,|tau| strength")
        ax.set_title("Consistent QM-HM correlations")
        fig.tight_layout()
        _save(fig, path)
    return path


def cumulative_ari_figure(cumulative: list[tuple[str, float]], path: str | Path) -> Path:
    """Histogram of per-metric cumulative ARI, best first."""
    path = Path(path)
    names = [n for n, _ in cumulative]
    values = [v for _, v in cumulative]
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        bars = ax.bar(range(len(names)), values, color="#4878a8")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
        ax.set_ylabel("cumulative ARI")
        ax.set_title("Cumulative ARI per metric")
        for bar, v in zip(bars, values):
            ax.annotate(f"{v:.3f}", (bar.get_x() + bar.get_width() / 2, v),
                        ha="center", va="bottom" if v >= 0 else "top", fontsize=7)
        fig.tight_layout()
        _save(fig, path)
    return path


def emit_figures(rows: list[AggregateRow], entries: list[CorrelationEntry] | None,
                 cumulative: list[tuple[str, float]] | None,
                 out_dir: str | Path) -> list[Path]:
    """Render whichever figures have data; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [aggregate_bar_figure(rows, out_dir / "aggregate_scores.svg")]
    if entries is not None:
        written.append(heatmap_figure(entries, out_dir / "correlation_heatmap.svg"))
    if cumulative is not None:
        written.append(cumulative_ari_figure(cumulative, out_dir / "cumulative_ari.svg"))
    return written
