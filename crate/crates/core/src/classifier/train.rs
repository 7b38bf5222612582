use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::encoder::EncoderSet;
use super::model::{
    attribute_row, encode_input, ClassifierInput, EncodedInput, EpochStats, FusionModel, MinMaxScaler, TrainHistory,
    TrainedModel, MODEL_FORMAT_VERSION,
};
use super::nn::Adam;
use super::ClassifierError;
use crate::corpus::{Group, LabeledSample};

/// Trains on `samples`, holding out a stratified `validation_fraction` for
/// early stopping.
pub fn train(samples: &[LabeledSample], cfg: &ModelConfig, encoders: &EncoderSet) -> Result<TrainedModel, ClassifierError> {
    let (train_idx, val_idx) = carve_validation(samples, cfg.validation_fraction, cfg.seed);
    let train: Vec<LabeledSample> = train_idx.iter().map(|&i| samples[i].clone()).collect();
    let val: Vec<LabeledSample> = val_idx.iter().map(|&i| samples[i].clone()).collect();
    train_with_validation(&train, &val, cfg, encoders, None)
}

/// Per-class seeded shuffle; each class gives up its rounded share, with
/// at least one sample overall when possible.
fn carve_validation(samples: &[LabeledSample], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a11_da7e);
    let mut val = Vec::new();
    let mut by_class: Vec<Vec<usize>> = Group::ALL
        .iter()
        .map(|&g| (0..samples.len()).filter(|&i| samples[i].group() == g).collect())
        .collect();
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let take = (members.len() as f64 * fraction).round() as usize;
        val.extend_from_slice(&members[..take.min(members.len().saturating_sub(1))]);
    }
    if val.is_empty() && fraction > 0.0 {
        if let Some(largest) = by_class.iter().filter(|m| m.len() > 1).max_by_key(|m| m.len()) {
            val.push(largest[0]);
        }
    }
    val.sort_unstable();
    let train = (0..samples.len()).filter(|i| val.binary_search(i).is_err()).collect();
    (train, val)
}

fn encode_all(
    samples: &[LabeledSample],
    cfg: &ModelConfig,
    encoders: &EncoderSet,
    scaler: Option<&MinMaxScaler>,
) -> Result<Vec<(EncodedInput, usize)>, ClassifierError> {
    samples
        .iter()
        .map(|s| Ok((encode_input(cfg, encoders, scaler, &ClassifierInput::from_sample(s))?, s.group().index())))
        .collect()
}

fn evaluate(model: &FusionModel, data: &[(EncodedInput, usize)]) -> Result<(f64, f64), ClassifierError> {
    if data.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, y) in data {
        let p = model.probabilities(x)?;
        loss -= p.0[*y].max(f64::MIN_POSITIVE).ln();
        correct += usize::from(p.argmax().index() == *y);
    }
    Ok((loss / data.len() as f64, correct as f64 / data.len() as f64))
}

/// Trains with an explicit validation split. The attribute scaler is fit on
/// `train` only.
pub fn train_with_validation(
    train: &[LabeledSample],
    validation: &[LabeledSample],
    cfg: &ModelConfig,
    encoders: &EncoderSet,
    fold_id: Option<usize>,
) -> Result<TrainedModel, ClassifierError> {
    cfg.validate()?;
    let first = train.first().ok_or_else(|| ClassifierError::Training("no training samples".into()))?.group();
    if train.iter().all(|s| s.group() == first) {
        return Err(ClassifierError::SingleClass);
    }
    if validation.is_empty() {
        return Err(ClassifierError::Training("validation set is empty".into()));
    }

    let scaler = if cfg.channels.attributes {
        let rows: Vec<Vec<f64>> = train.iter().map(|s| attribute_row(&s.attributes)).collect();
        MinMaxScaler::fit(rows.iter().map(Vec::as_slice))
    } else {
        None
    };
    let train_data = encode_all(train, cfg, encoders, scaler.as_ref())?;
    let val_data = encode_all(validation, cfg, encoders, scaler.as_ref())?;

    let dim = |ch| -> Result<usize, ClassifierError> { Ok(encoders.for_channel(cfg, ch)?.map_or(0, |e| e.dim())) };
    let mut model = FusionModel::new(
        cfg,
        if cfg.channels.code_context { dim(super::Channel::CodeContext)? } else { 0 },
        if cfg.channels.comment_text { dim(super::Channel::CommentText)? } else { 0 },
    );
    let mut adam = Adam::new(cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0b47_c4e5);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, FusionModel)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grad = model.zeros_like();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let (x, y) = &train_data[i];
                batch_loss += model.accumulate_gradient(x, *y, &mut grad, scale)?.0;
            }
            if !batch_loss.is_finite() {
                return Err(ClassifierError::NonFinite { epoch, batch: b + 1 });
            }
            loss_sum += batch_loss;
            adam.step(model.params_mut(), grad.params());
        }
        let (_, train_accuracy) = evaluate(&model, &train_data)?;
        let (val_loss, val_accuracy) = evaluate(&model, &val_data)?;
        if !val_loss.is_finite() {
            return Err(ClassifierError::NonFinite { epoch, batch: 0 });
        }
        history.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_data.len() as f64,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
        log::debug!("epoch {epoch}: val_loss {val_loss:.4} val_acc {val_accuracy:.3}");
        if best.as_ref().is_none_or(|(l, _)| val_loss < *l) {
            best = Some((val_loss, model.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stopping.patience {
                history.stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    if cfg.early_stopping.restore_best {
        if let Some((_, m)) = best {
            model = m;
        }
    } else {
        history.best_epoch = history.epochs.len();
    }

    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        config: cfg.clone(),
        training_fold_id: fold_id,
        scaler,
        network: model,
        history,
    })
}
