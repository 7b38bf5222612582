//! Frozen BERT/RoBERTa checkpoints in Hugging Face layout: a directory with
//! `config.json`, `tokenizer.json` and `model.safetensors` (or
//! `pytorch_model.bin`).

use std::path::Path;

use candle_core::{DType, Device, Module, Tensor};
use candle_nn::{embedding, layer_norm, linear, Embedding, LayerNorm, Linear, VarBuilder};
use serde::Deserialize;
use tokenizers::Tokenizer;

use super::config::EncoderKind;
use super::encoder::Encoder;
use super::tokenize::{frame, SpecialTokens, TokenizedInput};
use super::ClassifierError;

#[derive(Debug, Clone, Deserialize)]
pub struct TransformerConfig {
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "default_type_vocab")]
    pub type_vocab_size: usize,
    pub vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default)]
    pub pad_token_id: u32,
    #[serde(default)]
    pub model_type: String,
    #[serde(default = "default_act")]
    pub hidden_act: String,
}

fn default_type_vocab() -> usize {
    2
}

fn default_eps() -> f64 {
    1e-12
}

fn default_act() -> String {
    "gelu".into()
}

impl TransformerConfig {
    /// RoBERTa numbers positions from `pad + 1`.
    fn position_offset(&self) -> usize {
        if self.model_type.contains("roberta") {
            self.pad_token_id as usize + 1
        } else {
            0
        }
    }
}

fn err<E: std::fmt::Display>(e: E) -> ClassifierError {
    ClassifierError::Inference(e.to_string())
}

struct Layer {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_norm: LayerNorm,
    intermediate: Linear,
    output: Linear,
    out_norm: LayerNorm,
}

impl Layer {
    fn load(vb: VarBuilder, cfg: &TransformerConfig) -> candle_core::Result<Self> {
        let (h, i) = (cfg.hidden_size, cfg.intermediate_size);
        let att = vb.pp("attention");
        Ok(Self {
            query: linear(h, h, att.pp("self").pp("query"))?,
            key: linear(h, h, att.pp("self").pp("key"))?,
            value: linear(h, h, att.pp("self").pp("value"))?,
            attn_out: linear(h, h, att.pp("output").pp("dense"))?,
            attn_norm: layer_norm(h, cfg.layer_norm_eps, att.pp("output").pp("LayerNorm"))?,
            intermediate: linear(h, i, vb.pp("intermediate").pp("dense"))?,
            output: linear(i, h, vb.pp("output").pp("dense"))?,
            out_norm: layer_norm(h, cfg.layer_norm_eps, vb.pp("output").pp("LayerNorm"))?,
        })
    }

    fn forward(&self, x: &Tensor, heads: usize) -> candle_core::Result<Tensor> {
        let (b, n, h) = x.dims3()?;
        let dh = h / heads;
        let split = |t: Tensor| t.reshape((b, n, heads, dh))?.transpose(1, 2)?.contiguous();
        let q = split(self.query.forward(x)?)?;
        let k = split(self.key.forward(x)?)?;
        let v = split(self.value.forward(x)?)?;
        let scores = (q.matmul(&k.t()?)? / (dh as f64).sqrt())?;
        let probs = candle_nn::ops::softmax_last_dim(&scores)?;
        let ctx = probs.matmul(&v)?.transpose(1, 2)?.reshape((b, n, h))?;
        let x = self.attn_norm.forward(&(self.attn_out.forward(&ctx)? + x)?)?;
        let mid = self.intermediate.forward(&x)?.gelu_erf()?;
        self.out_norm.forward(&(self.output.forward(&mid)? + x)?)
    }
}

pub struct TransformerEncoder {
    kind: EncoderKind,
    cfg: TransformerConfig,
    max_len: usize,
    special: SpecialTokens,
    tokenizer: Tokenizer,
    words: Embedding,
    positions: Embedding,
    token_types: Embedding,
    embed_norm: LayerNorm,
    layers: Vec<Layer>,
}

impl TransformerEncoder {
    /// Loads a checkpoint directory. Sequences are capped at `max_len` and at
    /// what the position table allows.
    pub fn load(dir: &Path, kind: EncoderKind, max_len: usize) -> Result<Self, ClassifierError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| ClassifierError::Config(format!("{}: {e}", dir.join(name).display())))
        };
        let cfg: TransformerConfig = serde_json::from_str(&read("config.json")?)
            .map_err(|e| ClassifierError::Config(format!("config.json: {e}")))?;
        if !cfg.hidden_size.is_multiple_of(cfg.num_attention_heads) {
            return Err(ClassifierError::Config("hidden_size is not a multiple of num_attention_heads".into()));
        }
        if !cfg.hidden_act.starts_with("gelu") {
            return Err(ClassifierError::Config(format!("unsupported activation {}", cfg.hidden_act)));
        }
        let tokenizer = Tokenizer::from_file(dir.join("tokenizer.json"))
            .map_err(|e| ClassifierError::Config(format!("tokenizer.json: {e}")))?;
        let special = special_ids(&tokenizer, kind, cfg.pad_token_id)?;

        let safetensors = dir.join("model.safetensors");
        let vb = if safetensors.exists() {
            // SAFETY: the file is mapped read-only and not modified while loaded.
            unsafe { VarBuilder::from_mmaped_safetensors(&[safetensors], DType::F32, &Device::Cpu) }.map_err(err)?
        } else {
            VarBuilder::from_pth(dir.join("pytorch_model.bin"), DType::F32, &Device::Cpu).map_err(err)?
        };
        let vb = ["roberta", "bert", "model"]
            .into_iter()
            .map(|p| vb.pp(p))
            .find(|v| v.contains_tensor("embeddings.word_embeddings.weight"))
            .unwrap_or(vb);

        let h = cfg.hidden_size;
        let emb = vb.pp("embeddings");
        let words = embedding(cfg.vocab_size, h, emb.pp("word_embeddings")).map_err(err)?;
        let positions = embedding(cfg.max_position_embeddings, h, emb.pp("position_embeddings")).map_err(err)?;
        let token_types = embedding(cfg.type_vocab_size, h, emb.pp("token_type_embeddings")).map_err(err)?;
        let embed_norm = layer_norm(h, cfg.layer_norm_eps, emb.pp("LayerNorm")).map_err(err)?;
        let layers = (0..cfg.num_hidden_layers)
            .map(|i| Layer::load(vb.pp("encoder").pp("layer").pp(i), &cfg))
            .collect::<candle_core::Result<Vec<_>>>()
            .map_err(err)?;
        let max_len = max_len.min(cfg.max_position_embeddings - cfg.position_offset());
        log::info!("loaded {kind} encoder from {} ({} layers, width {h})", dir.display(), layers.len());
        Ok(Self { kind, cfg, max_len, special, tokenizer, words, positions, token_types, embed_norm, layers })
    }

    fn forward(&self, ids: &[u32]) -> candle_core::Result<Tensor> {
        let n = ids.len();
        let dev = Device::Cpu;
        let ids = Tensor::new(ids, &dev)?.unsqueeze(0)?;
        let offset = self.cfg.position_offset() as u32;
        let pos: Vec<u32> = (0..n as u32).map(|i| i + offset).collect();
        let pos = Tensor::new(pos.as_slice(), &dev)?.unsqueeze(0)?;
        let types = Tensor::zeros((1, n), DType::U32, &dev)?;
        let x = ((self.words.forward(&ids)? + self.positions.forward(&pos)?)? + self.token_types.forward(&types)?)?;
        let mut x = self.embed_norm.forward(&x)?;
        for layer in &self.layers {
            x = layer.forward(&x, self.cfg.num_attention_heads)?;
        }
        x.squeeze(0)
    }
}

fn special_ids(tok: &Tokenizer, kind: EncoderKind, pad_hint: u32) -> Result<SpecialTokens, ClassifierError> {
    let names: [&[&str]; 3] = [&["<s>", "[CLS]"], &["</s>", "[SEP]"], &["<pad>", "[PAD]"]];
    let find = |cands: &[&str]| cands.iter().find_map(|t| tok.token_to_id(t));
    let (Some(bos), Some(eos)) = (find(names[0]), find(names[1])) else {
        return Err(ClassifierError::Config(format!("{kind} tokenizer lacks start/end tokens")));
    };
    Ok(SpecialTokens { bos, eos, pad: find(names[2]).unwrap_or(pad_hint) })
}

impl Encoder for TransformerEncoder {
    fn kind(&self) -> EncoderKind {
        self.kind
    }

    fn dim(&self) -> usize {
        self.cfg.hidden_size
    }

    fn tokenize(&self, text: &str) -> TokenizedInput {
        let ids = match self.tokenizer.encode(text, false) {
            Ok(enc) => enc.get_ids().to_vec(),
            Err(e) => {
                log::warn!("tokenizer failed, encoding an empty sequence: {e}");
                Vec::new()
            }
        };
        frame(ids, self.special, self.max_len)
    }

    fn embed(&self, tokens: &TokenizedInput) -> Result<Vec<f32>, ClassifierError> {
        let ids: Vec<u32> = tokens.active_ids().collect();
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= self.cfg.vocab_size) {
            return Err(ClassifierError::Inference(format!("token id {bad} outside the vocabulary")));
        }
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let out = self.forward(&ids).map_err(err)?;
        out.flatten_all().and_then(|t| t.to_vec1::<f32>()).map_err(err)
    }
}
