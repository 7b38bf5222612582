//! Batch classification and the predictions CSV.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::attributes::{FileRevisionPair, Grammar};
use crate::classifier::{ClassProbabilities, Classifier, ClassifierError, ClassifierInput};
use crate::corpus::{compute_features, Group, ReviewComment};

pub const PREDICTION_HEADER: [&str; 8] = [
    "comment_id",
    "p_discussion",
    "p_documentation",
    "p_false_positive",
    "p_functional",
    "p_refactoring",
    "predicted_group",
    "error",
];

/// One output row; `probabilities` and `error` are mutually exclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub comment_id: String,
    pub probabilities: Option<ClassProbabilities>,
    pub error: Option<String>,
}

impl PredictionRow {
    pub fn predicted_group(&self) -> Option<Group> {
        self.probabilities.map(|p| p.argmax())
    }

    /// Probability of the predicted group.
    pub fn confidence(&self) -> Option<f64> {
        self.probabilities.map(|p| p.max())
    }

    pub fn gold(comment_id: impl Into<String>, group: Group) -> Self {
        let mut p = [0.0; Group::COUNT];
        p[group.index()] = 1.0;
        Self { comment_id: comment_id.into(), probabilities: Some(ClassProbabilities(p)), error: None }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    comment_id: String,
    p_discussion: Option<f64>,
    p_documentation: Option<f64>,
    p_false_positive: Option<f64>,
    p_functional: Option<f64>,
    p_refactoring: Option<f64>,
    predicted_group: String,
    error: String,
}

pub fn write_predictions<W: Write>(out: W, rows: &[PredictionRow]) -> Result<(), AnalyticsError> {
    let mut w = PredictionWriter::new(out)?;
    for r in rows {
        w.write(r)?;
    }
    w.finish()
}

/// Streaming writer; the header is written on creation so an empty batch
/// still yields a valid file.
pub struct PredictionWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> PredictionWriter<W> {
    pub fn new(out: W) -> Result<Self, AnalyticsError> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        inner.write_record(PREDICTION_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &PredictionRow) -> Result<(), AnalyticsError> {
        let fmt = |v: f64| format!("{v:.6}");
        let mut rec = vec![row.comment_id.clone()];
        match row.probabilities {
            Some(p) => rec.extend(p.0.iter().map(|&v| fmt(v))),
            None => rec.extend(std::iter::repeat_n(String::new(), Group::COUNT)),
        }
        rec.push(row.predicted_group().map(|g| g.to_string()).unwrap_or_default());
        rec.push(row.error.clone().unwrap_or_default());
        self.inner.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), AnalyticsError> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_predictions<R: Read>(input: R) -> Result<Vec<PredictionRow>, AnalyticsError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(PREDICTION_HEADER) {
        return Err(AnalyticsError::Format(format!("unexpected predictions header {:?}", headers.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (n, rec) in rdr.deserialize::<CsvRow>().enumerate() {
        let rec = rec?;
        let probs = [rec.p_discussion, rec.p_documentation, rec.p_false_positive, rec.p_functional, rec.p_refactoring];
        let probabilities = if probs.iter().all(Option::is_some) {
            Some(ClassProbabilities(probs.map(|p| p.unwrap_or_default())))
        } else if probs.iter().all(Option::is_none) {
            None
        } else {
            return Err(AnalyticsError::Format(format!("row {}: partial probabilities", n + 2)));
        };
        let row = PredictionRow {
            comment_id: rec.comment_id,
            probabilities,
            error: (!rec.error.is_empty()).then_some(rec.error),
        };
        if !rec.predicted_group.is_empty() {
            let stated = Group::from_str(&rec.predicted_group).map_err(|e| AnalyticsError::Format(format!("row {}: {e}", n + 2)))?;
            // Rounded probabilities may tie; the stated group wins only if it
            // is among the maxima.
            if let Some(p) = row.probabilities {
                if p.get(stated) < p.max() {
                    return Err(AnalyticsError::Format(format!("row {}: predicted_group is not the most probable", n + 2)));
                }
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// A comment to classify with the file pair it was made on, if known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchItem {
    pub comment: ReviewComment,
    #[serde(default)]
    pub pair: Option<FileRevisionPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    /// Rows held in memory at once.
    pub chunk_size: usize,
    /// Worker threads per chunk; 0 picks the available parallelism.
    pub jobs: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { chunk_size: 256, jobs: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BatchSummary {
    pub rows: usize,
    pub errors: usize,
}

/// Classifies one comment. Failures become the row's error code.
pub fn classify_item(clf: &Classifier, item: &BatchItem, grammar: &dyn Grammar) -> PredictionRow {
    let id = item.comment.comment_id.clone();
    let channels = clf.model().config.channels;
    if channels.attributes && item.pair.is_none() {
        return PredictionRow { comment_id: id, probabilities: None, error: Some("unresolved_file_pair".into()) };
    }
    let features = compute_features(&item.comment, item.pair.as_ref(), grammar);
    let input = ClassifierInput {
        comment_text: Some(item.comment.text.clone()),
        code_context: Some(features.context.map(|c| c.text).unwrap_or_default()),
        attributes: Some(features.attributes),
    };
    match clf.predict(&input) {
        Ok(p) => PredictionRow { comment_id: id, probabilities: Some(p), error: None },
        Err(e) => {
            let code = match e {
                ClassifierError::MissingChannel(ch) => format!("missing_channel:{ch}"),
                other => format!("inference_failed:{other}"),
            };
            PredictionRow { comment_id: id, probabilities: None, error: Some(code) }
        }
    }
}

/// Streams `items` through the classifier in bounded chunks, writing one
/// row per item in input order.
pub fn classify_batch<I, W>(
    clf: &Classifier,
    items: I,
    grammar: &dyn Grammar,
    out: W,
    opts: &BatchOptions,
) -> Result<BatchSummary, AnalyticsError>
where
    I: IntoIterator<Item = Result<BatchItem, AnalyticsError>>,
    W: Write,
{
    let jobs = match opts.jobs {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    let chunk_size = opts.chunk_size.max(1);
    let mut writer = PredictionWriter::new(out)?;
    let mut summary = BatchSummary::default();
    let mut items = items.into_iter();
    loop {
        let chunk = items.by_ref().take(chunk_size).collect::<Result<Vec<_>, _>>()?;
        if chunk.is_empty() {
            break;
        }
        let per_worker = chunk.len().div_ceil(jobs);
        let rows: Vec<PredictionRow> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .chunks(per_worker)
                .map(|part| scope.spawn(move || part.iter().map(|it| classify_item(clf, it, grammar)).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("classification worker panicked")).collect()
        });
        for r in &rows {
            summary.rows += 1;
            summary.errors += usize::from(r.error.is_some());
            writer.write(r)?;
        }
    }
    writer.finish()?;
    Ok(summary)
}
