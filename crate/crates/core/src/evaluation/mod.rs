//! Cross-validation, metrics and reports.

pub mod folds;
pub mod harness;
pub mod metrics;
pub mod report;

use thiserror::Error;

pub use folds::{folds_fingerprint, kfold_split, kfold_split_samples, FoldSplit, SplitMode};
pub use harness::{ablation_configs, cross_validate, cross_validate_on, run_ablations, run_folds, CvOptions, FoldData};
pub use metrics::{compute_metrics, mean_metrics, pool_folds, ClassMetrics, ConfusionMatrix, Metrics, ZeroDivision};
pub use report::{write_summary_csv, Aggregation, EvalReport, FoldReport, REPORT_VERSION};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Classifier(#[from] crate::classifier::ClassifierError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
