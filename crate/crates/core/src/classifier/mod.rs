//! Fusion classifier: frozen text encoders feed one recurrent layer per text
//! channel, whose final states are concatenated with the scaled attribute
//! vector and mapped to group probabilities.

pub mod config;
pub mod encoder;
pub mod model;
pub mod nn;
#[cfg(feature = "pretrained")]
pub mod pretrained;
pub mod tokenize;
pub mod train;

use thiserror::Error;

pub use config::{Channel, Channels, EarlyStopping, EncoderBackend, EncoderKind, ModelConfig, DEFAULT_STUB_DIM};
pub use encoder::{Encoder, EncoderSet, StubEncoder};
pub use model::{
    encode_input, ClassProbabilities, Classifier, ClassifierInput, EncodedInput, EpochStats, FusionModel, MinMaxScaler,
    TrainHistory, TrainedModel, MODEL_FORMAT_VERSION,
};
pub use train::{train, train_with_validation};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("encoder: {0}")]
    Inference(String),
    #[error("training: {0}")]
    Training(String),
    #[error("training data holds a single class")]
    SingleClass,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("input lacks the {0} channel")]
    MissingChannel(Channel),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
