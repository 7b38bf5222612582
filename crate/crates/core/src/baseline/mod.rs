//! Attributes-only random-forest baseline evaluated on the classifier's
//! folds.

pub mod features;
pub mod forest;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use features::{extract_baseline_attributes, BaselineVector, BASELINE_ATTRIBUTE_COUNT, BASELINE_ATTRIBUTE_NAMES};
pub use forest::{DecisionTree, ForestParams, MaxFeatures, RandomForest, TreeParams};

use crate::attributes::{FileRevisionPair, Grammar};
use crate::classifier::model::attribute_row;
use crate::corpus::{Group, LabeledSample};
use crate::evaluation::{folds_fingerprint, kfold_split_samples, run_folds, CvOptions, EvalError, EvalReport, FoldSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeSet {
    /// The change-classification attribute set mapped to Python.
    #[default]
    FregnanReplication,
    /// The classifier's own 27 attributes.
    #[serde(rename = "table2_27")]
    Table2_27,
}

impl AttributeSet {
    pub fn as_str(self) -> &'static str {
        match self {
            AttributeSet::FregnanReplication => "fregnan_replication",
            AttributeSet::Table2_27 => "table2_27",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fregnan_replication" => Some(Self::FregnanReplication),
            "table2_27" => Some(Self::Table2_27),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
    pub attribute_set: AttributeSet,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: None, seed: 42, attribute_set: AttributeSet::FregnanReplication }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n_trees == 0 {
            return Err(EvalError::Argument("n_trees must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(EvalError::Argument("max_depth must be at least 1".into()));
        }
        Ok(())
    }

    pub fn forest_params(&self, fold_id: usize) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            tree: TreeParams { max_depth: self.max_depth, min_samples_split: 2, max_features: MaxFeatures::Sqrt },
            bootstrap: true,
            seed: self.seed.wrapping_add(1_000_003 * fold_id as u64),
        }
    }

    fn header(&self) -> BTreeMap<String, String> {
        let mut h = BTreeMap::new();
        h.insert("model".into(), "random_forest (gini, bootstrap, sqrt features)".into());
        h.insert("n_trees".into(), self.n_trees.to_string());
        h.insert("max_depth".into(), self.max_depth.map_or("unlimited".into(), |d| d.to_string()));
        h.insert("forest_seed".into(), self.seed.to_string());
        h.insert("attribute_set".into(), self.attribute_set.as_str().into());
        h.insert("training_rows".into(), "train and validation folds".into());
        h
    }

    fn fingerprint(&self) -> String {
        crate::corpus::store::hex_digest(serde_json::to_string(self).unwrap_or_default().as_bytes())
    }
}

/// Feature rows keyed by comment id. Only file pairs and precomputed
/// attribute vectors are read; comment text never is.
pub fn baseline_features(
    samples: &[LabeledSample],
    pairs: &HashMap<String, FileRevisionPair>,
    set: AttributeSet,
    grammar: &dyn Grammar,
) -> HashMap<String, Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            let row = match set {
                AttributeSet::Table2_27 => attribute_row(&s.attributes),
                AttributeSet::FregnanReplication => {
                    let empty;
                    let pair = match pairs.get(s.comment_id()) {
                        Some(p) => p,
                        None => {
                            empty = FileRevisionPair::new(s.comment.file_path.clone(), None, None);
                            &empty
                        }
                    };
                    extract_baseline_attributes(pair, grammar).values.iter().map(|&v| f64::from(v)).collect()
                }
            };
            (s.comment_id().to_string(), row)
        })
        .collect()
}

/// Cross-validates the forest on precomputed folds.
pub fn evaluate_baseline_on(
    samples: &[LabeledSample],
    folds: &[FoldSplit],
    features: &HashMap<String, Vec<f64>>,
    cfg: &BaselineConfig,
    opts: &CvOptions,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    let row = |s: &LabeledSample| {
        features
            .get(s.comment_id())
            .ok_or_else(|| EvalError::Argument(format!("no baseline features for {}", s.comment_id())))
    };
    let jobs = if opts.jobs == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { opts.jobs };
    let matrices = run_folds(samples, folds, jobs, |fold| {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for s in fold.train.iter().chain(&fold.validation) {
            x.push(row(s)?.clone());
            y.push(s.group().index());
        }
        let forest = RandomForest::fit(&x, &y, Group::COUNT, &cfg.forest_params(fold.fold_id));
        fold.test
            .iter()
            .map(|s| Ok(Group::from_index(forest.predict(row(s)?)).expect("class index in range")))
            .collect()
    })?;
    let mut header = opts.header();
    header.extend(cfg.header());
    EvalReport::from_fold_matrices("baseline_random_forest", matrices, header, cfg.fingerprint(), folds_fingerprint(folds))
}

/// Splits with the same options as the classifier, so both runs see
/// identical folds.
pub fn train_and_evaluate_baseline(
    samples: &[LabeledSample],
    features: &HashMap<String, Vec<f64>>,
    cfg: &BaselineConfig,
    opts: &CvOptions,
) -> Result<EvalReport, EvalError> {
    let folds = kfold_split_samples(samples, opts.k, opts.seed, opts.mode)?;
    evaluate_baseline_on(samples, &folds, features, cfg, opts)
}
