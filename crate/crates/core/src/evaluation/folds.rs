use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{store::hex_digest, Group, LabeledSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    Stratified,
    Unstratified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Splits `ids` into `k` test folds. The validation set of fold `f` is the
/// test fold `f + 1` when `k >= 3`, which gives 80/10/10 for `k = 10`;
/// smaller `k` carves every tenth training item out instead.
pub fn kfold_split(ids: &[String], labels: &[Group], k: usize, seed: u64, mode: SplitMode) -> Result<Vec<FoldSplit>, EvalError> {
    if ids.len() != labels.len() {
        return Err(EvalError::Argument(format!("{} ids but {} labels", ids.len(), labels.len())));
    }
    if k < 2 {
        return Err(EvalError::Argument(format!("k must be at least 2, got {k}")));
    }
    if k > ids.len() {
        return Err(EvalError::Argument(format!("k = {k} exceeds dataset size {}", ids.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = match mode {
        SplitMode::Stratified => {
            let mut order = Vec::with_capacity(ids.len());
            for g in Group::ALL {
                let mut members: Vec<usize> = (0..ids.len()).filter(|&i| labels[i] == g).collect();
                members.shuffle(&mut rng);
                order.extend(members);
            }
            order
        }
        SplitMode::Unstratified => {
            let mut order: Vec<usize> = (0..ids.len()).collect();
            order.shuffle(&mut rng);
            order
        }
    };
    let mut fold_of = vec![0usize; ids.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    let members = |f: usize| -> Vec<usize> { (0..ids.len()).filter(|&i| fold_of[i] == f).collect() };
    let names = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&i| ids[i].clone()).collect() };

    Ok((0..k)
        .map(|f| {
            let test = members(f);
            let (train, validation): (Vec<usize>, Vec<usize>) = if k >= 3 {
                let v = (f + 1) % k;
                let validation = members(v);
                let train = (0..ids.len()).filter(|&i| fold_of[i] != f && fold_of[i] != v).collect();
                (train, validation)
            } else {
                let rest: Vec<usize> = (0..ids.len()).filter(|&i| fold_of[i] != f).collect();
                let mut train = Vec::new();
                let mut validation = Vec::new();
                for (n, i) in rest.into_iter().enumerate() {
                    if n % 10 == 9 { validation.push(i) } else { train.push(i) }
                }
                (train, validation)
            };
            FoldSplit { fold_id: f, train_ids: names(&train), validation_ids: names(&validation), test_ids: names(&test) }
        })
        .collect())
}

pub fn kfold_split_samples(samples: &[LabeledSample], k: usize, seed: u64, mode: SplitMode) -> Result<Vec<FoldSplit>, EvalError> {
    let ids: Vec<String> = samples.iter().map(|s| s.comment_id().to_string()).collect();
    let labels: Vec<Group> = samples.iter().map(LabeledSample::group).collect();
    kfold_split(&ids, &labels, k, seed, mode)
}

/// Digest of every fold assignment, used to prove two runs shared folds.
pub fn folds_fingerprint(folds: &[FoldSplit]) -> String {
    hex_digest(serde_json::to_string(folds).unwrap_or_default().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn dataset(counts: [usize; 5]) -> (Vec<String>, Vec<Group>) {
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        for (g, &n) in Group::ALL.iter().zip(&counts) {
            for i in 0..n {
                ids.push(format!("{}-{i}", g.key()));
                labels.push(*g);
            }
        }
        (ids, labels)
    }

    #[test]
    fn full_dataset_sized_folds() {
        let (ids, labels) = dataset([445, 387, 158, 240, 598]);
        let folds = kfold_split(&ids, &labels, 10, 7, SplitMode::Stratified).unwrap();
        let sizes: HashSet<usize> = folds.iter().map(|f| f.test_ids.len()).collect();
        assert_eq!(sizes, HashSet::from([182, 183]));
        for f in &folds {
            let all: HashSet<&String> = f.train_ids.iter().chain(&f.validation_ids).chain(&f.test_ids).collect();
            assert_eq!(all.len(), ids.len());
            assert!((1460..=1464).contains(&f.train_ids.len()));
        }
        assert_eq!(folds, kfold_split(&ids, &labels, 10, 7, SplitMode::Stratified).unwrap());
        assert_ne!(folds, kfold_split(&ids, &labels, 10, 8, SplitMode::Stratified).unwrap());
    }

    #[test]
    fn leave_one_out_and_errors() {
        let (ids, labels) = dataset([2, 2, 1, 0, 0]);
        let folds = kfold_split(&ids, &labels, 5, 1, SplitMode::Unstratified).unwrap();
        assert!(folds.iter().all(|f| f.test_ids.len() == 1 && f.validation_ids.len() == 1 && f.train_ids.len() == 3));
        assert!(kfold_split(&ids, &labels, 6, 1, SplitMode::Stratified).is_err());
        assert!(kfold_split(&ids, &labels, 1, 1, SplitMode::Stratified).is_err());
        let two = kfold_split(&ids, &labels, 2, 1, SplitMode::Stratified).unwrap();
        assert!(two.iter().all(|f| f.train_ids.len() + f.validation_ids.len() + f.test_ids.len() == 5));
    }

    proptest! {
        #[test]
        fn partition_and_stratification(counts in prop::array::uniform5(0usize..60), k in 2usize..12, seed in any::<u64>()) {
            let (ids, labels) = dataset(counts);
            prop_assume!(ids.len() >= k);
            let folds = kfold_split(&ids, &labels, k, seed, SplitMode::Stratified).unwrap();
            let mut seen = HashSet::new();
            for f in &folds {
                for id in &f.test_ids {
                    prop_assert!(seen.insert(id.clone()));
                }
                let train: HashSet<_> = f.train_ids.iter().collect();
                let val: HashSet<_> = f.validation_ids.iter().collect();
                prop_assert!(f.test_ids.iter().all(|t| !train.contains(t) && !val.contains(t)));
                prop_assert!(train.is_disjoint(&val));
            }
            prop_assert_eq!(seen.len(), ids.len());
            let label_of: std::collections::HashMap<&String, Group> = ids.iter().zip(labels.iter().copied()).collect();
            for g in Group::ALL {
                let per_fold: Vec<usize> = folds.iter().map(|f| f.test_ids.iter().filter(|i| label_of[i] == g).count()).collect();
                let lo = *per_fold.iter().min().unwrap();
                let hi = *per_fold.iter().max().unwrap();
                prop_assert!(hi - lo <= 1);
            }
        }
    }
}
