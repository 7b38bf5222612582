//! Batch classification and the reports built on its predictions.

pub mod charts;
pub mod predictions;
pub mod reports;

use thiserror::Error;

pub use charts::{bar_chart_svg, ratios_chart, reviewers_chart};
pub use predictions::{
    classify_batch, classify_item, read_predictions, write_predictions, BatchItem, BatchOptions, BatchSummary,
    PredictionRow, PredictionWriter, PREDICTION_HEADER,
};
pub use reports::{
    group_ratios, prioritize, reviewer_report, write_priority_csv, write_ratios_csv, write_reviewer_csv, GroupPriority,
    GroupRatio, RankedComment, ReviewerStats,
};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("{0}")]
    Format(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
