use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Channel, ModelConfig};
use super::encoder::EncoderSet;
use super::nn::{softmax, Dense, Lstm};
use super::ClassifierError;
use crate::attributes::{AttributeVector, ATTRIBUTE_COUNT};
use crate::corpus::{Group, LabeledSample};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Min-max scaling fit on training rows; constant columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Option<Self> {
        let mut it = rows.into_iter();
        let first = it.next()?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in it {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Some(Self { min, max })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let range = self.max[j] - self.min[j];
                if range > 0.0 { (v - self.min[j]) / range } else { 0.0 }
            })
            .collect()
    }
}

/// Probabilities in group order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbabilities(pub [f64; Group::COUNT]);

impl ClassProbabilities {
    pub fn get(&self, group: Group) -> f64 {
        self.0[group.index()]
    }

    /// Most probable group; ties go to the earlier group.
    pub fn argmax(&self) -> Group {
        let mut best = 0;
        for i in 1..Group::COUNT {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        Group::from_index(best).expect("index below group count")
    }

    pub fn max(&self) -> f64 {
        self.get(self.argmax())
    }
}

/// Raw inputs of one comment. `None` marks a channel that could not be
/// resolved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifierInput {
    pub comment_text: Option<String>,
    pub code_context: Option<String>,
    pub attributes: Option<AttributeVector>,
}

impl ClassifierInput {
    /// A sample without code context feeds an empty context string.
    pub fn from_sample(s: &LabeledSample) -> Self {
        Self {
            comment_text: Some(s.comment.text.clone()),
            code_context: Some(s.context.as_ref().map(|c| c.text.clone()).unwrap_or_default()),
            attributes: Some(s.attributes),
        }
    }
}

/// Channel tensors ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInput {
    pub code: Option<Vec<f32>>,
    pub comment: Option<Vec<f32>>,
    pub attributes: Option<Vec<f64>>,
}

pub fn attribute_row(v: &AttributeVector) -> Vec<f64> {
    v.to_array().iter().map(|&x| f64::from(x)).collect()
}

/// Tokenizes and embeds the enabled channels of `input`.
pub fn encode_input(
    cfg: &ModelConfig,
    encoders: &EncoderSet,
    scaler: Option<&MinMaxScaler>,
    input: &ClassifierInput,
) -> Result<EncodedInput, ClassifierError> {
    let text_channel = |channel: Channel, text: &Option<String>| -> Result<Option<Vec<f32>>, ClassifierError> {
        if !cfg.channels.contains(channel) {
            return Ok(None);
        }
        let text = text.as_deref().ok_or(ClassifierError::MissingChannel(channel))?;
        let encoder = encoders.for_channel(cfg, channel)?.expect("text channels have encoders");
        Ok(Some(encoder.embed(&encoder.tokenize(text))?))
    };
    let attributes = if cfg.channels.attributes {
        let v = input.attributes.as_ref().ok_or(ClassifierError::MissingChannel(Channel::Attributes))?;
        let row = attribute_row(v);
        Some(match scaler {
            Some(s) => s.transform(&row),
            None => row,
        })
    } else {
        None
    };
    Ok(EncodedInput {
        code: text_channel(Channel::CodeContext, &input.code_context)?,
        comment: text_channel(Channel::CommentText, &input.comment_text)?,
        attributes,
    })
}

/// Per-channel recurrent summaries, concatenated (code, comment,
/// attributes) and classified by one dense softmax layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub code: Option<Lstm>,
    pub comment: Option<Lstm>,
    pub attribute_width: usize,
    pub dense: Dense,
}

impl FusionModel {
    pub fn new(cfg: &ModelConfig, code_dim: usize, comment_dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        // The code layer is drawn first so it does not depend on the other
        // channels' settings.
        let code = cfg.channels.code_context.then(|| Lstm::new(code_dim, cfg.recurrent_units, &mut rng));
        let comment = cfg.channels.comment_text.then(|| Lstm::new(comment_dim, cfg.recurrent_units, &mut rng));
        let attribute_width = if cfg.channels.attributes { ATTRIBUTE_COUNT } else { 0 };
        let dense = Dense::new(cfg.fusion_width(ATTRIBUTE_COUNT), Group::COUNT, &mut rng);
        Self { code, comment, attribute_width, dense }
    }

    pub fn fusion_width(&self) -> usize {
        self.code.as_ref().map_or(0, |l| l.units) + self.comment.as_ref().map_or(0, |l| l.units) + self.attribute_width
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            code: self.code.as_ref().map(Lstm::zeros_like),
            comment: self.comment.as_ref().map(Lstm::zeros_like),
            attribute_width: self.attribute_width,
            dense: self.dense.zeros_like(),
        }
    }

    pub fn params(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for l in [&self.code, &self.comment].into_iter().flatten() {
            out.extend([&l.kernel, &l.recurrent, &l.bias]);
        }
        out.extend([&self.dense.weight, &self.dense.bias]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for l in [&mut self.code, &mut self.comment].into_iter().flatten() {
            out.extend([&mut l.kernel, &mut l.recurrent, &mut l.bias]);
        }
        out.extend([&mut self.dense.weight, &mut self.dense.bias]);
        out
    }

    fn check_input(&self, x: &EncodedInput) -> Result<(), ClassifierError> {
        let pairs = [
            (self.code.as_ref(), x.code.as_ref(), Channel::CodeContext),
            (self.comment.as_ref(), x.comment.as_ref(), Channel::CommentText),
        ];
        for (layer, seq, channel) in pairs {
            match (layer, seq) {
                (Some(_), None) => return Err(ClassifierError::MissingChannel(channel)),
                (Some(l), Some(s)) if s.len() % l.input_dim != 0 => {
                    return Err(ClassifierError::WidthMismatch(format!(
                        "{channel} embeddings are not a multiple of {}",
                        l.input_dim
                    )))
                }
                _ => {}
            }
        }
        match (self.attribute_width, x.attributes.as_ref()) {
            (0, _) => Ok(()),
            (_, None) => Err(ClassifierError::MissingChannel(Channel::Attributes)),
            (w, Some(a)) if a.len() != w => Err(ClassifierError::WidthMismatch(format!("{} attributes, expected {w}", a.len()))),
            _ => Ok(()),
        }
    }

    fn fused(&self, code: Option<&[f64]>, comment: Option<&[f64]>, x: &EncodedInput) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.fusion_width());
        v.extend(code.unwrap_or(&[]));
        v.extend(comment.unwrap_or(&[]));
        if self.attribute_width > 0 {
            v.extend(x.attributes.as_deref().unwrap_or(&[]));
        }
        v
    }

    pub fn probabilities(&self, x: &EncodedInput) -> Result<ClassProbabilities, ClassifierError> {
        self.check_input(x)?;
        let code = self.code.as_ref().zip(x.code.as_ref()).map(|(l, s)| l.forward(s));
        let comment = self.comment.as_ref().zip(x.comment.as_ref()).map(|(l, s)| l.forward(s));
        let fused = self.fused(code.as_deref(), comment.as_deref(), x);
        let p = softmax(&self.dense.forward(&fused));
        let mut out = [0.0; Group::COUNT];
        out.copy_from_slice(&p);
        Ok(ClassProbabilities(out))
    }

    /// Adds `scale` times the cross-entropy gradient for `label` into
    /// `grad` and returns the unscaled loss.
    pub fn accumulate_gradient(
        &self,
        x: &EncodedInput,
        label: usize,
        grad: &mut FusionModel,
        scale: f64,
    ) -> Result<(f64, ClassProbabilities), ClassifierError> {
        self.check_input(x)?;
        let code_trace = self.code.as_ref().zip(x.code.as_ref()).map(|(l, s)| l.forward_trace(s));
        let comment_trace = self.comment.as_ref().zip(x.comment.as_ref()).map(|(l, s)| l.forward_trace(s));
        let code_h = code_trace.as_ref().map(|t| t.output(self.code.as_ref().unwrap().units));
        let comment_h = comment_trace.as_ref().map(|t| t.output(self.comment.as_ref().unwrap().units));
        let fused = self.fused(code_h, comment_h, x);
        let p = softmax(&self.dense.forward(&fused));
        let loss = -p[label].max(f64::MIN_POSITIVE).ln();

        let mut dy: Vec<f64> = p.iter().map(|&v| v * scale).collect();
        dy[label] -= scale;
        let dfused = self.dense.backward(&fused, &dy, &mut grad.dense);
        let mut offset = 0;
        for (layer, trace, seq, g) in [
            (&self.code, &code_trace, &x.code, &mut grad.code),
            (&self.comment, &comment_trace, &x.comment, &mut grad.comment),
        ] {
            if let (Some(l), Some(t), Some(s), Some(g)) = (layer, trace, seq, g.as_mut()) {
                l.backward(s, t, &dfused[offset..offset + l.units], g);
                offset += l.units;
            }
        }
        let mut probs = [0.0; Group::COUNT];
        probs.copy_from_slice(&p);
        Ok((loss, ClassProbabilities(probs)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochStats> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub config: ModelConfig,
    pub training_fold_id: Option<usize>,
    pub scaler: Option<MinMaxScaler>,
    pub network: FusionModel,
    pub history: TrainHistory,
}

impl TrainedModel {
    /// Checks that the stored layers have the widths the configuration
    /// implies.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::WidthMismatch(format!("unsupported model format {}", self.format_version)));
        }
        let cfg = &self.config;
        cfg.validate()?;
        let net = &self.network;
        let expected = cfg.fusion_width(ATTRIBUTE_COUNT);
        if net.dense.inputs != expected || net.fusion_width() != expected {
            return Err(ClassifierError::WidthMismatch(format!(
                "fusion width {} (dense expects {}), configuration implies {expected}",
                net.fusion_width(),
                net.dense.inputs
            )));
        }
        if net.dense.outputs != Group::COUNT || net.dense.weight.len() != net.dense.inputs * net.dense.outputs {
            return Err(ClassifierError::WidthMismatch("dense layer shape is inconsistent".into()));
        }
        for (layer, on, name) in [(&net.code, cfg.channels.code_context, "code"), (&net.comment, cfg.channels.comment_text, "comment")] {
            match layer {
                Some(l) if !on => return Err(ClassifierError::WidthMismatch(format!("{name} layer present but channel disabled"))),
                None if on => return Err(ClassifierError::WidthMismatch(format!("{name} channel enabled but layer missing"))),
                Some(l) => {
                    let u = l.units;
                    if u != cfg.recurrent_units
                        || l.kernel.len() != 4 * u * l.input_dim
                        || l.recurrent.len() != 4 * u * u
                        || l.bias.len() != 4 * u
                    {
                        return Err(ClassifierError::WidthMismatch(format!("{name} layer shape is inconsistent")));
                    }
                }
                None => {}
            }
        }
        if cfg.channels.attributes {
            match &self.scaler {
                Some(s) if s.min.len() == ATTRIBUTE_COUNT && s.max.len() == ATTRIBUTE_COUNT => {}
                _ => return Err(ClassifierError::WidthMismatch("attribute scaler missing or wrong width".into())),
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        let model: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        model.validate()?;
        Ok(model)
    }
}

/// A trained model bound to its encoders; immutable and shareable across
/// threads.
pub struct Classifier {
    model: TrainedModel,
    encoders: EncoderSet,
}

impl Classifier {
    pub fn new(model: TrainedModel, encoders: EncoderSet) -> Result<Self, ClassifierError> {
        model.validate()?;
        let cfg = &model.config;
        for (layer, channel) in [(&model.network.code, Channel::CodeContext), (&model.network.comment, Channel::CommentText)] {
            if let (Some(l), Some(enc)) = (layer, encoders.for_channel(cfg, channel)?) {
                if enc.dim() != l.input_dim {
                    return Err(ClassifierError::WidthMismatch(format!(
                        "{channel} encoder produces {} dims, model expects {}",
                        enc.dim(),
                        l.input_dim
                    )));
                }
            }
        }
        Ok(Self { model, encoders })
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    pub fn encode(&self, input: &ClassifierInput) -> Result<EncodedInput, ClassifierError> {
        encode_input(&self.model.config, &self.encoders, self.model.scaler.as_ref(), input)
    }

    pub fn predict(&self, input: &ClassifierInput) -> Result<ClassProbabilities, ClassifierError> {
        self.model.network.probabilities(&self.encode(input)?)
    }
}
