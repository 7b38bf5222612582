//! Frozen token encoders. The stub maps every vocabulary id to a fixed
//! pseudo-random vector so the full pipeline runs without checkpoints.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{Channel, EncoderBackend, EncoderKind, ModelConfig};
use super::tokenize::{stub_tokenize, vocab_size, TokenizedInput};
use super::ClassifierError;

pub trait Encoder: Send + Sync {
    fn kind(&self) -> EncoderKind;

    /// Width of one token embedding.
    fn dim(&self) -> usize;

    fn tokenize(&self, text: &str) -> TokenizedInput;

    /// Embeddings of the unmasked positions in order, row-major
    /// `active_len x dim`.
    fn embed(&self, tokens: &TokenizedInput) -> Result<Vec<f32>, ClassifierError>;
}

pub struct StubEncoder {
    kind: EncoderKind,
    dim: usize,
    max_len: usize,
    table: Vec<f32>,
}

impl StubEncoder {
    pub fn new(kind: EncoderKind, dim: usize, max_len: usize) -> Self {
        let salt = match kind {
            EncoderKind::HybridCodeNl => 0xc0de_beef,
            EncoderKind::GeneralNl => 0xbe27_0001,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(salt ^ dim as u64);
        let table = (0..vocab_size(kind) * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self { kind, dim, max_len, table }
    }

    /// Shared instance; building the table once per process keeps repeated
    /// fold runs cheap.
    pub fn shared(kind: EncoderKind, dim: usize, max_len: usize) -> Arc<StubEncoder> {
        type Cache = Mutex<HashMap<(EncoderKind, usize, usize), Arc<StubEncoder>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let mut cache = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
        cache.entry((kind, dim, max_len)).or_insert_with(|| Arc::new(StubEncoder::new(kind, dim, max_len))).clone()
    }
}

impl Encoder for StubEncoder {
    fn kind(&self) -> EncoderKind {
        self.kind
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn tokenize(&self, text: &str) -> TokenizedInput {
        stub_tokenize(self.kind, text, self.max_len)
    }

    fn embed(&self, tokens: &TokenizedInput) -> Result<Vec<f32>, ClassifierError> {
        let mut out = Vec::with_capacity(tokens.active_len() * self.dim);
        for id in tokens.active_ids() {
            let row = id as usize;
            if row >= vocab_size(self.kind) {
                return Err(ClassifierError::Inference(format!("token id {id} outside the vocabulary")));
            }
            out.extend_from_slice(&self.table[row * self.dim..(row + 1) * self.dim]);
        }
        Ok(out)
    }
}

/// Encoders needed by one configuration.
#[derive(Clone)]
pub struct EncoderSet {
    hybrid: Arc<dyn Encoder>,
    general: Option<Arc<dyn Encoder>>,
}

impl EncoderSet {
    pub fn new(hybrid: Arc<dyn Encoder>, general: Option<Arc<dyn Encoder>>) -> Self {
        Self { hybrid, general }
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<Self, ClassifierError> {
        match &cfg.encoder {
            EncoderBackend::Stub { dim } => Ok(Self {
                hybrid: StubEncoder::shared(EncoderKind::HybridCodeNl, *dim, cfg.max_length),
                general: Some(StubEncoder::shared(EncoderKind::GeneralNl, *dim, cfg.max_length)),
            }),
            EncoderBackend::Pretrained { hybrid, general } => pretrained_set(hybrid, general.as_deref(), cfg.max_length),
        }
    }

    /// Encoder feeding `channel`, or `None` for the attribute channel.
    pub fn for_channel(&self, cfg: &ModelConfig, channel: Channel) -> Result<Option<&dyn Encoder>, ClassifierError> {
        let kind = match channel {
            Channel::CodeContext => cfg.code_encoder,
            Channel::CommentText => cfg.comment_encoder,
            Channel::Attributes => return Ok(None),
        };
        match kind {
            EncoderKind::HybridCodeNl => Ok(Some(self.hybrid.as_ref())),
            EncoderKind::GeneralNl => self
                .general
                .as_deref()
                .map(Some)
                .ok_or_else(|| ClassifierError::Config("no general_nl encoder loaded".into())),
        }
    }
}

#[cfg(feature = "pretrained")]
fn pretrained_set(hybrid: &std::path::Path, general: Option<&std::path::Path>, max_len: usize) -> Result<EncoderSet, ClassifierError> {
    use super::pretrained::TransformerEncoder;
    let hybrid: Arc<dyn Encoder> = Arc::new(TransformerEncoder::load(hybrid, EncoderKind::HybridCodeNl, max_len)?);
    let general = match general {
        Some(p) => Some(Arc::new(TransformerEncoder::load(p, EncoderKind::GeneralNl, max_len)?) as Arc<dyn Encoder>),
        None => None,
    };
    Ok(EncoderSet { hybrid, general })
}

#[cfg(not(feature = "pretrained"))]
fn pretrained_set(_: &std::path::Path, _: Option<&std::path::Path>, _: usize) -> Result<EncoderSet, ClassifierError> {
    Err(ClassifierError::Config("pretrained encoders need the `pretrained` cargo feature".into()))
}
