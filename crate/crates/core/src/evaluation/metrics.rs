use serde::{Deserialize, Serialize};

use super::EvalError;

/// Square count matrix, rows = ground truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self, EvalError> {
        let n = rows.len();
        let mut cm = Self::new(n);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(EvalError::Argument(format!("row {t} has {} entries, expected {n}", row.len())));
            }
            cm.counts[t * n..(t + 1) * n].copy_from_slice(row);
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Relabels classes: new class `i` is old class `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::new(self.classes);
        for t in 0..self.classes {
            for p in 0..self.classes {
                out.counts[t * self.classes + p] = self.get(perm[t], perm[p]);
            }
        }
        out
    }
}

/// Which metrics hit a zero denominator and were reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroDivision {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
    pub mcc: bool,
}

impl ZeroDivision {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1 || self.mcc
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub support: u64,
    #[serde(default)]
    pub zero_division: ZeroDivision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 { (0.0, true) } else { (num / den, false) }
}

/// One-vs-rest precision, recall, F1 and MCC per class, plus accuracy.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    let total = cm.total();
    if cm.classes() == 0 || total == 0 {
        return Err(EvalError::Argument("confusion matrix is empty".into()));
    }
    let n = total as f64;
    let per_class = (0..cm.classes())
        .map(|c| {
            let tp = cm.get(c, c) as f64;
            let fp = cm.col_sum(c) as f64 - tp;
            let fneg = cm.row_sum(c) as f64 - tp;
            let tn = n - tp - fp - fneg;
            let (precision, zp) = ratio(tp, tp + fp);
            let (recall, zr) = ratio(tp, tp + fneg);
            let (f1, zf) = ratio(2.0 * precision * recall, precision + recall);
            let den = ((tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg)).sqrt();
            let (mcc, zm) = ratio(tp * tn - fp * fneg, den);
            ClassMetrics {
                precision,
                recall,
                f1,
                mcc,
                support: cm.row_sum(c),
                zero_division: ZeroDivision { precision: zp, recall: zr, f1: zf, mcc: zm },
            }
        })
        .collect();
    Ok(Metrics { per_class, accuracy: cm.trace() as f64 / n })
}

/// Elementwise sum of per-fold matrices.
pub fn pool_folds(per_fold: &[ConfusionMatrix]) -> Result<ConfusionMatrix, EvalError> {
    let first = per_fold.first().ok_or_else(|| EvalError::Argument("no fold matrices to pool".into()))?;
    let mut out = ConfusionMatrix::new(first.classes());
    for (i, cm) in per_fold.iter().enumerate() {
        if cm.classes() != out.classes() {
            return Err(EvalError::Argument(format!(
                "fold {i} matrix is {0}x{0}, expected {1}x{1}",
                cm.classes(),
                out.classes()
            )));
        }
        for (a, b) in out.counts.iter_mut().zip(&cm.counts) {
            *a += b;
        }
    }
    Ok(out)
}

/// Unweighted mean of per-fold metrics.
pub fn mean_metrics(folds: &[Metrics]) -> Option<Metrics> {
    let first = folds.first()?;
    let k = folds.len() as f64;
    let per_class = (0..first.per_class.len())
        .map(|c| {
            let mut m = ClassMetrics::default();
            for f in folds {
                let x = &f.per_class[c];
                m.precision += x.precision / k;
                m.recall += x.recall / k;
                m.f1 += x.f1 / k;
                m.mcc += x.mcc / k;
                m.support += x.support;
                m.zero_division.precision |= x.zero_division.precision;
                m.zero_division.recall |= x.zero_division.recall;
                m.zero_division.f1 |= x.zero_division.f1;
                m.zero_division.mcc |= x.zero_division.mcc;
            }
            m
        })
        .collect();
    let accuracy = folds.iter().map(|f| f.accuracy).sum::<f64>() / k;
    Some(Metrics { per_class, accuracy })
}
