//! Model configuration and its `key = value` file format.
//!
//! ```text
//! # comments start with '#'
//! comment_encoder = hybrid_code_nl      # or general_nl
//! code_encoder = hybrid_code_nl
//! channels = code_context, comment_text, attributes
//! recurrent_units = 50
//! batch_size = 4
//! max_epochs = 8
//! validation_fraction = 0.1
//! early_stopping.monitor = val_loss
//! early_stopping.patience = 2
//! early_stopping.restore_best = true
//! optimizer = adam
//! learning_rate = 0.001
//! loss = categorical_crossentropy
//! seed = 42
//! max_length = 512
//! encoder.backend = stub                # or pretrained
//! encoder.stub_dim = 64
//! encoder.hybrid_checkpoint = /path/to/codebert
//! encoder.general_checkpoint = /path/to/bert
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::corpus::store::hex_digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Natural-language-only pretrained encoder.
    GeneralNl,
    /// Encoder pretrained on code and natural language together.
    HybridCodeNl,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::GeneralNl => "general_nl",
            EncoderKind::HybridCodeNl => "hybrid_code_nl",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncoderKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "general_nl" | "general" => Ok(EncoderKind::GeneralNl),
            "hybrid_code_nl" | "hybrid" => Ok(EncoderKind::HybridCodeNl),
            other => Err(ClassifierError::Config(format!("unknown encoder {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    CodeContext,
    CommentText,
    Attributes,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::CodeContext, Channel::CommentText, Channel::Attributes];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::CodeContext => "code_context",
            Channel::CommentText => "comment_text",
            Channel::Attributes => "attributes",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "code_context" | "code" => Ok(Channel::CodeContext),
            "comment_text" | "comment" => Ok(Channel::CommentText),
            "attributes" | "attrs" => Ok(Channel::Attributes),
            other => Err(ClassifierError::Config(format!("unknown channel {other:?}"))),
        }
    }
}

/// Enabled input channels. Fusion order is always code, comment, attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Channels {
    pub code_context: bool,
    pub comment_text: bool,
    pub attributes: bool,
}

impl Channels {
    pub const ALL: Channels = Channels { code_context: true, comment_text: true, attributes: true };

    pub fn only(channel: Channel) -> Self {
        let mut c = Channels { code_context: false, comment_text: false, attributes: false };
        c.set(channel, true);
        c
    }

    pub fn contains(&self, channel: Channel) -> bool {
        match channel {
            Channel::CodeContext => self.code_context,
            Channel::CommentText => self.comment_text,
            Channel::Attributes => self.attributes,
        }
    }

    pub fn set(&mut self, channel: Channel, on: bool) {
        match channel {
            Channel::CodeContext => self.code_context = on,
            Channel::CommentText => self.comment_text = on,
            Channel::Attributes => self.attributes = on,
        }
    }

    pub fn enabled(&self) -> Vec<Channel> {
        Channel::ALL.into_iter().filter(|c| self.contains(*c)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.enabled().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    ValLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub monitor: Monitor,
    pub patience: usize,
    pub restore_best: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "backend")]
pub enum EncoderBackend {
    /// Hash-based pseudo-embeddings; no checkpoint needed.
    Stub { dim: usize },
    /// Checkpoint directories holding `config.json`, `tokenizer.json` and
    /// `model.safetensors`.
    Pretrained { hybrid: PathBuf, general: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub comment_encoder: EncoderKind,
    pub code_encoder: EncoderKind,
    pub channels: Channels,
    pub recurrent_units: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    pub early_stopping: EarlyStopping,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_length: usize,
    pub encoder: EncoderBackend,
}

pub const DEFAULT_STUB_DIM: usize = 64;

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            comment_encoder: EncoderKind::HybridCodeNl,
            code_encoder: EncoderKind::HybridCodeNl,
            channels: Channels::ALL,
            recurrent_units: 50,
            batch_size: 4,
            max_epochs: 8,
            validation_fraction: 0.10,
            early_stopping: EarlyStopping { monitor: Monitor::ValLoss, patience: 2, restore_best: true },
            learning_rate: 1e-3,
            seed: 42,
            max_length: 512,
            encoder: EncoderBackend::Stub { dim: DEFAULT_STUB_DIM },
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ClassifierError> {
    value.parse().map_err(|_| ClassifierError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ClassifierError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ClassifierError::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let err = |m: &str| Err(ClassifierError::Config(m.to_string()));
        if self.channels.is_empty() {
            return err("at least one channel must be enabled");
        }
        if self.code_encoder != EncoderKind::HybridCodeNl {
            return err("the code channel always uses the hybrid code/NL encoder");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return err("validation_fraction must lie in (0, 0.5)");
        }
        if self.recurrent_units == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return err("recurrent_units, batch_size and max_epochs must be positive");
        }
        if self.max_length < 2 {
            return err("max_length must leave room for the two sentinel tokens");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err("learning_rate must be positive");
        }
        if let EncoderBackend::Stub { dim: 0 } = self.encoder {
            return err("encoder.stub_dim must be positive");
        }
        if let EncoderBackend::Pretrained { general: None, .. } = self.encoder {
            if self.comment_encoder == EncoderKind::GeneralNl && self.channels.comment_text {
                return err("general_nl comment encoder needs encoder.general_checkpoint");
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ClassifierError> {
        let mut cfg = ModelConfig::default();
        let mut stub_dim = DEFAULT_STUB_DIM;
        let mut backend = "stub".to_string();
        let mut hybrid = None;
        let mut general = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ClassifierError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "comment_encoder" => cfg.comment_encoder = value.parse()?,
                "code_encoder" => cfg.code_encoder = value.parse()?,
                "channels" => {
                    let mut ch = Channels { code_context: false, comment_text: false, attributes: false };
                    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                        ch.set(part.parse()?, true);
                    }
                    cfg.channels = ch;
                }
                "recurrent_units" => cfg.recurrent_units = parse_num(key, value)?,
                "batch_size" => cfg.batch_size = parse_num(key, value)?,
                "max_epochs" => cfg.max_epochs = parse_num(key, value)?,
                "validation_fraction" => cfg.validation_fraction = parse_num(key, value)?,
                "early_stopping.monitor" => {
                    if value != "val_loss" {
                        return Err(ClassifierError::Config(format!("only val_loss can be monitored, got {value:?}")));
                    }
                }
                "early_stopping.patience" => cfg.early_stopping.patience = parse_num(key, value)?,
                "early_stopping.restore_best" => cfg.early_stopping.restore_best = parse_bool(key, value)?,
                "optimizer" => {
                    if !value.eq_ignore_ascii_case("adam") {
                        return Err(ClassifierError::Config(format!("unsupported optimizer {value:?}")));
                    }
                }
                "learning_rate" => cfg.learning_rate = parse_num(key, value)?,
                "loss" => {
                    if value != "categorical_crossentropy" {
                        return Err(ClassifierError::Config(format!("unsupported loss {value:?}")));
                    }
                }
                "seed" => cfg.seed = parse_num(key, value)?,
                "max_length" => cfg.max_length = parse_num(key, value)?,
                "encoder.backend" => backend = value.to_ascii_lowercase(),
                "encoder.stub_dim" => stub_dim = parse_num(key, value)?,
                "encoder.hybrid_checkpoint" => hybrid = Some(PathBuf::from(value)),
                "encoder.general_checkpoint" => general = Some(PathBuf::from(value)),
                other => return Err(ClassifierError::Config(format!("line {}: unknown key {other:?}", n + 1))),
            }
        }
        cfg.encoder = match backend.as_str() {
            "stub" => EncoderBackend::Stub { dim: stub_dim },
            "pretrained" => EncoderBackend::Pretrained {
                hybrid: hybrid.ok_or_else(|| ClassifierError::Config("pretrained backend needs encoder.hybrid_checkpoint".into()))?,
                general,
            },
            other => return Err(ClassifierError::Config(format!("unknown encoder backend {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical key/value rendering; `parse(to_kv())` is the identity.
    pub fn to_kv(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("comment_encoder", self.comment_encoder.to_string());
        m.insert("code_encoder", self.code_encoder.to_string());
        m.insert("channels", self.channels.enabled().iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "));
        m.insert("recurrent_units", self.recurrent_units.to_string());
        m.insert("batch_size", self.batch_size.to_string());
        m.insert("max_epochs", self.max_epochs.to_string());
        m.insert("validation_fraction", self.validation_fraction.to_string());
        m.insert("early_stopping.monitor", "val_loss".into());
        m.insert("early_stopping.patience", self.early_stopping.patience.to_string());
        m.insert("early_stopping.restore_best", self.early_stopping.restore_best.to_string());
        m.insert("optimizer", "adam".into());
        m.insert("learning_rate", self.learning_rate.to_string());
        m.insert("loss", "categorical_crossentropy".into());
        m.insert("seed", self.seed.to_string());
        m.insert("max_length", self.max_length.to_string());
        match &self.encoder {
            EncoderBackend::Stub { dim } => {
                m.insert("encoder.backend", "stub".into());
                m.insert("encoder.stub_dim", dim.to_string());
            }
            EncoderBackend::Pretrained { hybrid, general } => {
                m.insert("encoder.backend", "pretrained".into());
                m.insert("encoder.hybrid_checkpoint", hybrid.display().to_string());
                if let Some(g) = general {
                    m.insert("encoder.general_checkpoint", g.display().to_string());
                }
            }
        }
        m.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn fingerprint(&self) -> String {
        hex_digest(self.to_kv().as_bytes())
    }

    /// Width of the concatenated fusion vector.
    pub fn fusion_width(&self, attribute_count: usize) -> usize {
        let mut w = 0;
        if self.channels.code_context {
            w += self.recurrent_units;
        }
        if self.channels.comment_text {
            w += self.recurrent_units;
        }
        if self.channels.attributes {
            w += attribute_count;
        }
        w
    }
}
