//! Versioned evaluation report.
//!
//! JSON layout (version 1):
//!
//! ```text
//! { "version": 1, "name": ..., "classes": [5 group names],
//!   "header": {free-form run notes},
//!   "config_fingerprint": sha256, "folds_fingerprint": sha256,
//!   "folds": [{"fold_id", "confusion", "metrics"}],
//!   "pooled": {"confusion", "metrics"},
//!   "fold_mean": metrics }
//! ```
//!
//! `metrics` is `{"per_class": [{precision, recall, f1, mcc, support,
//! zero_division}], "accuracy"}` with classes in `classes` order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, mean_metrics, pool_folds, ConfusionMatrix, Metrics};
use super::EvalError;
use crate::corpus::Group;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    FoldMean,
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold_id: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledReport {
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub name: String,
    pub classes: Vec<String>,
    pub header: BTreeMap<String, String>,
    pub config_fingerprint: String,
    pub folds_fingerprint: String,
    pub folds: Vec<FoldReport>,
    pub pooled: PooledReport,
    pub fold_mean: Metrics,
}

impl EvalReport {
    pub fn from_fold_matrices(
        name: &str,
        matrices: Vec<(usize, ConfusionMatrix)>,
        header: BTreeMap<String, String>,
        config_fingerprint: String,
        folds_fingerprint: String,
    ) -> Result<Self, EvalError> {
        let cms: Vec<ConfusionMatrix> = matrices.iter().map(|(_, cm)| cm.clone()).collect();
        let pooled = pool_folds(&cms)?;
        let folds = matrices
            .into_iter()
            .map(|(fold_id, confusion)| {
                // A fold whose test set is empty cannot produce metrics.
                let metrics = compute_metrics(&confusion)?;
                Ok(FoldReport { fold_id, confusion, metrics })
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        let fold_metrics: Vec<Metrics> = folds.iter().map(|f| f.metrics.clone()).collect();
        Ok(Self {
            version: REPORT_VERSION,
            name: name.to_string(),
            classes: Group::ALL.iter().map(|g| g.to_string()).collect(),
            header,
            config_fingerprint,
            folds_fingerprint,
            pooled: PooledReport { metrics: compute_metrics(&pooled)?, confusion: pooled },
            fold_mean: mean_metrics(&fold_metrics).expect("at least one fold"),
            folds,
        })
    }

    pub fn metrics(&self, aggregation: Aggregation) -> &Metrics {
        match aggregation {
            Aggregation::FoldMean => &self.fold_mean,
            Aggregation::Pooled => &self.pooled.metrics,
        }
    }

    pub fn accuracy(&self, aggregation: Aggregation) -> f64 {
        self.metrics(aggregation).accuracy
    }

    pub fn write_json(&self, path: &Path) -> Result<(), EvalError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self, EvalError> {
        let report: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if report.version != REPORT_VERSION {
            return Err(EvalError::Argument(format!("unsupported report version {}", report.version)));
        }
        Ok(report)
    }

    /// Per-class table in the layout of the published tables, one block per
    /// aggregation.
    pub fn write_csv(&self, path: &Path) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["aggregation", "class", "precision", "recall", "f1", "mcc", "support"])?;
        for (label, agg) in [("pooled", Aggregation::Pooled), ("fold_mean", Aggregation::FoldMean)] {
            let m = self.metrics(agg);
            for (class, c) in self.classes.iter().zip(&m.per_class) {
                w.write_record([
                    label.to_string(),
                    class.clone(),
                    format!("{:.3}", c.precision),
                    format!("{:.3}", c.recall),
                    format!("{:.3}", c.f1),
                    format!("{:.3}", c.mcc),
                    c.support.to_string(),
                ])?;
            }
            // Accuracy goes in the first metric column.
            let accuracy = format!("{:.3}", m.accuracy);
            w.write_record([label, "accuracy", accuracy.as_str(), "", "", "", ""])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One line per report: name, pooled and fold-mean accuracy.
pub fn write_summary_csv(path: &Path, reports: &[EvalReport]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run", "accuracy_pooled", "accuracy_fold_mean"])?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            format!("{:.3}", r.accuracy(Aggregation::Pooled)),
            format!("{:.3}", r.accuracy(Aggregation::FoldMean)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> EvalReport {
        let a = ConfusionMatrix::from_rows(&[[2, 0, 0, 0, 0], [0, 1, 0, 0, 1], [0, 0, 1, 0, 0], [0, 0, 0, 1, 0], [1, 0, 0, 0, 2]]).unwrap();
        let b = ConfusionMatrix::from_rows(&[[1, 0, 0, 0, 0], [0, 2, 0, 0, 0], [0, 0, 0, 1, 0], [0, 0, 0, 1, 0], [0, 0, 0, 0, 3]]).unwrap();
        let header = BTreeMap::from([("split".to_string(), "stratified".to_string())]);
        EvalReport::from_fold_matrices("t", vec![(0, a), (1, b)], header, "cfg".into(), "folds".into()).unwrap()
    }

    #[test]
    fn pooled_accuracy_is_trace_over_total() {
        let r = report();
        let cm = &r.pooled.confusion;
        assert_eq!(r.accuracy(Aggregation::Pooled), cm.trace() as f64 / cm.total() as f64);
        assert_eq!((cm.trace(), cm.total()), (14, 17));
        let mean = (r.folds[0].metrics.accuracy + r.folds[1].metrics.accuracy) / 2.0;
        assert!((r.accuracy(Aggregation::FoldMean) - mean).abs() < 1e-12);
    }

    #[test]
    fn json_and_csv_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let r = report();
        let p = tmp.path().join("r.json");
        r.write_json(&p).unwrap();
        assert_eq!(EvalReport::read_json(&p).unwrap(), r);
        let c = tmp.path().join("r.csv");
        r.write_csv(&c).unwrap();
        let text = fs::read_to_string(&c).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 6);
        assert!(text.contains("pooled,accuracy,0.824"));
        let s = tmp.path().join("s.csv");
        write_summary_csv(&s, &[r]).unwrap();
        assert!(fs::read_to_string(s).unwrap().contains("t,0.824,"));
    }
}
