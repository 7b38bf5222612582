//! Cross-validated training runs and the channel/encoder ablation grid.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::folds::{folds_fingerprint, kfold_split_samples, FoldSplit, SplitMode};
use super::metrics::ConfusionMatrix;
use super::report::EvalReport;
use super::EvalError;
use crate::classifier::{
    train_with_validation, Channel, Channels, Classifier, ClassifierInput, EncoderBackend, EncoderKind, EncoderSet,
    ModelConfig,
};
use crate::corpus::{Group, LabeledSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub mode: SplitMode,
    /// Folds trained concurrently; 0 picks the available parallelism.
    pub jobs: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { k: 10, seed: 42, mode: SplitMode::Stratified, jobs: 0 }
    }
}

impl CvOptions {
    fn workers(&self, folds: usize) -> usize {
        let auto = std::thread::available_parallelism().map_or(1, |n| n.get());
        let jobs = if self.jobs == 0 { auto } else { self.jobs };
        jobs.clamp(1, folds.max(1))
    }

    /// Header entries shared by every report built with these options.
    pub fn header(&self) -> BTreeMap<String, String> {
        let mut h = BTreeMap::new();
        h.insert("folds".into(), self.k.to_string());
        h.insert("split_seed".into(), self.seed.to_string());
        let split = match self.mode {
            SplitMode::Stratified => "stratified by group (deviation from a plain random split)",
            SplitMode::Unstratified => "unstratified",
        };
        h.insert("split".into(), split.into());
        h.insert("aggregations".into(), "fold_mean, pooled".into());
        h
    }
}

/// Samples of one fold, in dataset order.
pub struct FoldData {
    pub fold_id: usize,
    pub train: Vec<LabeledSample>,
    pub validation: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

fn fold_data(samples: &[LabeledSample], by_id: &HashMap<&str, usize>, fold: &FoldSplit) -> Result<FoldData, EvalError> {
    let pick = |ids: &[String]| {
        ids.iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|&i| samples[i].clone())
                    .ok_or_else(|| EvalError::Argument(format!("fold references unknown comment {id}")))
            })
            .collect::<Result<Vec<_>, _>>()
    };
    Ok(FoldData {
        fold_id: fold.fold_id,
        train: pick(&fold.train_ids)?,
        validation: pick(&fold.validation_ids)?,
        test: pick(&fold.test_ids)?,
    })
}

/// Runs `predict_fold` on every fold and tallies its test predictions.
/// Folds run on up to `jobs` threads; results come back in fold order.
pub fn run_folds<F>(
    samples: &[LabeledSample],
    folds: &[FoldSplit],
    jobs: usize,
    predict_fold: F,
) -> Result<Vec<(usize, ConfusionMatrix)>, EvalError>
where
    F: Fn(&FoldData) -> Result<Vec<Group>, EvalError> + Sync,
{
    let mut by_id = HashMap::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if by_id.insert(s.comment_id(), i).is_some() {
            return Err(EvalError::Argument(format!("duplicate comment id {}", s.comment_id())));
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ConfusionMatrix, EvalError>>>> =
        Mutex::new(std::iter::repeat_with(|| None).take(folds.len()).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, folds.len().max(1)) {
            scope.spawn(|| loop {
                let n = next.fetch_add(1, Ordering::SeqCst);
                let Some(fold) = folds.get(n) else { break };
                let outcome = fold_data(samples, &by_id, fold).and_then(|data| {
                    let predicted = predict_fold(&data)?;
                    if predicted.len() != data.test.len() {
                        return Err(EvalError::Argument(format!(
                            "fold {} returned {} predictions for {} test samples",
                            fold.fold_id,
                            predicted.len(),
                            data.test.len()
                        )));
                    }
                    let mut cm = ConfusionMatrix::new(Group::COUNT);
                    for (s, p) in data.test.iter().zip(&predicted) {
                        cm.record(s.group().index(), p.index());
                    }
                    log::info!("fold {} done: accuracy {:.3}", fold.fold_id, cm.trace() as f64 / cm.total().max(1) as f64);
                    Ok(cm)
                });
                let failed = outcome.is_err();
                results.lock().unwrap()[n] = Some(outcome);
                if failed {
                    // Let the other workers drain quickly.
                    next.store(folds.len(), Ordering::SeqCst);
                }
            });
        }
    });
    let mut out = Vec::with_capacity(folds.len());
    for (fold, r) in folds.iter().zip(results.into_inner().unwrap()) {
        match r {
            Some(r) => out.push((fold.fold_id, r?)),
            None => return Err(EvalError::Argument(format!("fold {} did not run", fold.fold_id))),
        }
    }
    Ok(out)
}

fn config_header(cfg: &ModelConfig) -> BTreeMap<String, String> {
    let mut h = BTreeMap::new();
    h.insert("channels".into(), cfg.channels.enabled().iter().map(|c| c.as_str()).collect::<Vec<_>>().join(","));
    h.insert("comment_encoder".into(), cfg.comment_encoder.to_string());
    h.insert("code_encoder".into(), cfg.code_encoder.to_string());
    let backend = match &cfg.encoder {
        EncoderBackend::Stub { dim } => format!("stub (dim {dim})"),
        EncoderBackend::Pretrained { .. } => "pretrained".into(),
    };
    h.insert("encoder_backend".into(), backend);
    h.insert("early_stopping".into(), format!("val_loss, patience {}, restore_best {}", cfg.early_stopping.patience, cfg.early_stopping.restore_best));
    h
}

/// Trains and tests the classifier on precomputed folds.
pub fn cross_validate_on(
    name: &str,
    samples: &[LabeledSample],
    folds: &[FoldSplit],
    cfg: &ModelConfig,
    encoders: &EncoderSet,
    opts: &CvOptions,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    let matrices = run_folds(samples, folds, opts.workers(folds.len()), |fold| {
        let model = train_with_validation(&fold.train, &fold.validation, cfg, encoders, Some(fold.fold_id))?;
        let clf = Classifier::new(model, encoders.clone())?;
        fold.test
            .iter()
            .map(|s| Ok(clf.predict(&ClassifierInput::from_sample(s))?.argmax()))
            .collect()
    })?;
    let mut header = opts.header();
    header.extend(config_header(cfg));
    EvalReport::from_fold_matrices(name, matrices, header, cfg.fingerprint(), folds_fingerprint(folds))
}

pub fn cross_validate(
    name: &str,
    samples: &[LabeledSample],
    cfg: &ModelConfig,
    encoders: &EncoderSet,
    opts: &CvOptions,
) -> Result<EvalReport, EvalError> {
    let folds = kfold_split_samples(samples, opts.k, opts.seed, opts.mode)?;
    cross_validate_on(name, samples, &folds, cfg, encoders, opts)
}

/// Named configurations of the ablation grid derived from `base`.
pub fn ablation_configs(base: &ModelConfig) -> Vec<(String, ModelConfig)> {
    let with = |channels: Channels, comment: EncoderKind| ModelConfig { channels, comment_encoder: comment, ..base.clone() };
    vec![
        ("code_only".into(), with(Channels::only(Channel::CodeContext), base.comment_encoder)),
        ("comment_only_hybrid_code_nl".into(), with(Channels::only(Channel::CommentText), EncoderKind::HybridCodeNl)),
        ("comment_only_general_nl".into(), with(Channels::only(Channel::CommentText), EncoderKind::GeneralNl)),
        ("attributes_only".into(), with(Channels::only(Channel::Attributes), base.comment_encoder)),
        ("all_hybrid_code_nl".into(), with(Channels::ALL, EncoderKind::HybridCodeNl)),
        ("all_general_nl".into(), with(Channels::ALL, EncoderKind::GeneralNl)),
    ]
}

/// Every ablation on one shared set of folds.
pub fn run_ablations(
    samples: &[LabeledSample],
    base: &ModelConfig,
    encoders: &EncoderSet,
    opts: &CvOptions,
) -> Result<Vec<EvalReport>, EvalError> {
    let folds = kfold_split_samples(samples, opts.k, opts.seed, opts.mode)?;
    ablation_configs(base)
        .iter()
        .map(|(name, cfg)| {
            log::info!("ablation {name}");
            cross_validate_on(name, samples, &folds, cfg, encoders, opts)
        })
        .collect()
}
