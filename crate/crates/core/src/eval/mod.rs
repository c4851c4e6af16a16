//! Per-domain metrics, hop-level grouping, multi-seed experiments and
//! report files.

mod experiment;
mod metrics;
mod report;

pub use experiment::{config_digest, metrics_csv, run_experiment, DatasetSpec, ExperimentResult, RunFailure, RunManifest, RunOutput};
pub use metrics::{
    hop_level_aggregate, hop_levels, per_domain_metrics, DomainMetric, HopAggregates, MetricKind, MetricTable,
    Predictor, DG_EVAL_DRAWS,
};
pub use report::{accuracy_map_svg, convergence_svg, emit_report, metric_color, summarize, SummaryRow};
