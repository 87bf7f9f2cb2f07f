//! Metrics with the NaN and anchor exclusions, the bilinear baseline, the
//! ablation driver and report writers.

mod ablation;
mod metrics;
mod report;

pub use ablation::{median, run_ablation, run_variant, summarize, AblationRow, AblationRun, AblationTable, AblationVariant};
pub use metrics::{
    bilinear_baseline, bilinear_baseline_set, compute_metrics, MetricsAccumulator, MetricsReport, Prediction,
    TargetMetrics,
};
pub use report::{
    curves_csv, emit_report, format_ablation, format_table, reports_from_jsonl, reports_to_jsonl, write_curves,
    ReportFiles,
};
