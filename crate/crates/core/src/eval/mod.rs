//! Grouped cross-validation, confusion metrics, intervals, t-tests and
//! report rendering.

mod crossval;
mod folds;
mod metrics;
mod report;
mod stats;

pub use crossval::{
    fit_model, prepare_inputs, run_crossval, run_fold, test_totals, ClassCounts, CvConfig, CvReport, FittedModel,
    FoldReport, MetricSummary,
};
pub use folds::{grouped_kfold, holdout_split, validation_count, Fold, FoldPlan};
pub use metrics::{confusion, Metrics};
pub use report::{
    comparison_matrix, format_summary, parse_csv, render_csv, render_text, summary_rows, ComparisonMatrix, SummaryRow,
    METRIC_NAMES,
};
pub use stats::{
    ci95_mean, incomplete_beta, mean, sample_variance, t_cdf, t_quantile_975, t_test, t_two_sided, TTestMode,
};
