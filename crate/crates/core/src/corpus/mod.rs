//! Review mining, persistence, sampling and labels.

pub mod dataset;
pub mod kappa;
pub mod mining;
pub mod records;
pub mod rubric;
pub mod sampling;
pub mod store;

use thiserror::Error;

pub use kappa::cohens_kappa;
pub use records::{
    ChangeRecord, ChangeStatus, CommentRange, Label, LabeledSample, PatchSetRef, ReviewComment, SampleMetadata,
};
pub use rubric::{group_of, Group, Subcategory};
pub use sampling::sample_comments;
pub use dataset::{build_samples, compute_features, filter_source_related, load_samples, LoadOptions};
pub use store::{import_dataset, DatasetDir, ImportSummary, LabelRow};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("subcategory {subcategory} does not belong to group {group}")]
    LabelMismatch { subcategory: String, group: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
