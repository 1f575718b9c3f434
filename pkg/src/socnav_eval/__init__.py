"""Social-navigation run evaluation: trajectory metrics, survey alignment,
clustering-based metric selection, and rank-correlation reports."""

__version__ = "0.1.0"

from .aggregate import (
    AggregateRow,
    MetricSetSpec,
    TrendReport,
    aggregate,
    build_aggregate_rows,
    trend_agreement,
)
from .clustering import (
    Partition,
    SubsetResult,
    ari,
    cumulative_ari,
    kmeans,
    silhouette,
    subset_search,
)
from .core import (
    ExperimentRecord,
    HM_NAMES,
    ObstacleMap,
    Pose2D,
    SurveyTable,
    TimedState,
    Trajectory,
)
from .dataset import load_dataset, load_record, load_survey, save_dataset, save_record
from .metrics import (
    METRIC_NAMES,
    MetricVector,
    ProxemicsThresholds,
    SfmParams,
    compute_all,
    compute_metric_table,
    social_force,
    social_work,
)
from .pipeline import PipelineConfig, StageError, load_config, run_pipeline
from .preprocess import impute_hm_for_clustering, normalize_qm, scale_hm
from .rankstats import CorrelationEntry, Thresholds, consistent_correlations, kendall, spearman
from .synth import SynthSpec, corpus_specs, corpus_survey, generate, generate_corpus

__all__ = [
    "AggregateRow",
    "CorrelationEntry",
    "ExperimentRecord",
    "HM_NAMES",
    "METRIC_NAMES",
    "MetricSetSpec",
    "MetricVector",
    "ObstacleMap",
    "Partition",
    "PipelineConfig",
    "Pose2D",
    "ProxemicsThresholds",
    "SfmParams",
    "StageError",
    "SubsetResult",
    "SurveyTable",
    "SynthSpec",
    "Thresholds",
    "TimedState",
    "Trajectory",
    "TrendReport",
    "aggregate",
    "ari",
    "build_aggregate_rows",
    "compute_all",
    "compute_metric_table",
    "consistent_correlations",
    "corpus_specs",
    "corpus_survey",
    "cumulative_ari",
    "generate",
    "generate_corpus",
    "impute_hm_for_clustering",
    "kendall",
    "kmeans",
    "load_config",
    "load_dataset",
    "load_record",
    "load_survey",
    "normalize_qm",
    "run_pipeline",
    "save_dataset",
    "save_record",
    "scale_hm",
    "silhouette",
    "social_force",
    "social_work",
    "spearman",
    "subset_search",
    "trend_agreement",
]
