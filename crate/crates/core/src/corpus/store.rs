//! On-disk dataset layout.
//!
//! ```text
//! DIR/
//!   changes.jsonl    one ChangeRecord per line
//!   comments.jsonl   one ReviewComment per line
//!   index.json       record counts and byte offsets of comments
//!   labels.csv       comment_id,subcategory,group,annotator_a,annotator_b,final
//!   pairs.jsonl      comment_id -> source/destination blob ids
//!   blobs/<sha256>   file revisions, content addressed
//!   cursor.json      mining resume point
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::records::{Label, ReviewComment};
use super::rubric::{Group, Subcategory};
use super::{cohens_kappa, CorpusError};
use crate::attributes::FileRevisionPair;

pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct DatasetDir {
    root: PathBuf,
}

impl DatasetDir {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn create(root: impl Into<PathBuf>) -> Result<Self, CorpusError> {
        let dir = Self::open(root);
        fs::create_dir_all(dir.blob_dir())?;
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn changes_path(&self) -> PathBuf {
        self.root.join("changes.jsonl")
    }

    pub fn comments_path(&self) -> PathBuf {
        self.root.join("comments.jsonl")
    }

    pub fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    pub fn labels_path(&self) -> PathBuf {
        self.root.join("labels.csv")
    }

    pub fn pairs_path(&self) -> PathBuf {
        self.root.join("pairs.jsonl")
    }

    pub fn blob_dir(&self) -> PathBuf {
        self.root.join("blobs")
    }

    pub fn cursor_path(&self) -> PathBuf {
        self.root.join("cursor.json")
    }

    pub fn attributes_path(&self) -> PathBuf {
        self.root.join("attributes.csv")
    }

    pub fn contexts_path(&self) -> PathBuf {
        self.root.join("contexts.jsonl")
    }

    /// Stores `text` under its sha256 and returns the id.
    pub fn put_blob(&self, text: &str) -> Result<String, CorpusError> {
        let id = hex_digest(text.as_bytes());
        let path = self.blob_dir().join(&id);
        if !path.exists() {
            fs::create_dir_all(self.blob_dir())?;
            fs::write(path, text)?;
        }
        Ok(id)
    }

    pub fn get_blob(&self, id: &str) -> Result<String, CorpusError> {
        Ok(fs::read_to_string(self.blob_dir().join(id))?)
    }

    pub fn read_comments(&self) -> Result<Vec<ReviewComment>, CorpusError> {
        read_jsonl(&self.comments_path())
    }

    pub fn read_labels(&self) -> Result<Vec<LabelRow>, CorpusError> {
        read_label_csv(&self.labels_path())
    }

    /// File pairs keyed by comment id, with blob contents resolved.
    pub fn read_pairs(&self) -> Result<HashMap<String, FileRevisionPair>, CorpusError> {
        let path = self.pairs_path();
        if !path.exists() {
            return Ok(HashMap::new());
        }
        let records: Vec<PairRecord> = read_jsonl(&path)?;
        let mut out = HashMap::with_capacity(records.len());
        for r in records {
            let source = r.source.as_deref().map(|id| self.get_blob(id)).transpose()?;
            let destination = r.destination.as_deref().map(|id| self.get_blob(id)).transpose()?;
            out.insert(r.comment_id, FileRevisionPair::new(r.file_path, source, destination));
        }
        Ok(out)
    }

    pub fn read_index(&self) -> Result<StoreIndex, CorpusError> {
        Ok(serde_json::from_str(&fs::read_to_string(self.index_path())?)?)
    }

    /// Rescans the record files and rewrites `index.json`.
    pub fn rebuild_index(&self) -> Result<StoreIndex, CorpusError> {
        let mut index = StoreIndex { version: STORE_VERSION, ..Default::default() };
        if self.comments_path().exists() {
            let mut reader = BufReader::new(File::open(self.comments_path())?);
            let mut offset = 0u64;
            let mut line = String::new();
            loop {
                line.clear();
                let n = reader.read_line(&mut line)?;
                if n == 0 {
                    break;
                }
                if let Ok(c) = serde_json::from_str::<ReviewComment>(line.trim_end()) {
                    index.comment_offsets.insert(c.comment_id, offset);
                    index.comments += 1;
                }
                offset += n as u64;
            }
        }
        index.changes = count_lines(&self.changes_path())?;
        index.pairs = count_lines(&self.pairs_path())?;
        if self.labels_path().exists() {
            index.labels = self.read_labels()?.len();
        }
        fs::write(self.index_path(), serde_json::to_string_pretty(&index)?)?;
        Ok(index)
    }

    /// Looks a comment up through the index without reading the whole file.
    pub fn find_comment(&self, index: &StoreIndex, comment_id: &str) -> Result<Option<ReviewComment>, CorpusError> {
        use std::io::{Seek, SeekFrom};
        let Some(&offset) = index.comment_offsets.get(comment_id) else { return Ok(None) };
        let mut reader = BufReader::new(File::open(self.comments_path())?);
        reader.seek(SeekFrom::Start(offset))?;
        let mut line = String::new();
        reader.read_line(&mut line)?;
        Ok(Some(serde_json::from_str(line.trim_end())?))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub version: u32,
    pub changes: usize,
    pub comments: usize,
    pub labels: usize,
    pub pairs: usize,
    pub comment_offsets: BTreeMap<String, u64>,
}

/// One row of `pairs.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub comment_id: String,
    pub file_path: String,
    pub source: Option<String>,
    pub destination: Option<String>,
}

/// Pair with inline file contents, as accepted by `import-dataset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InlinePairRecord {
    pub comment_id: String,
    pub file_path: String,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub destination: Option<String>,
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn count_lines(path: &Path) -> Result<usize, CorpusError> {
    if !path.exists() {
        return Ok(0);
    }
    let reader = BufReader::new(File::open(path)?);
    let mut n = 0;
    for line in reader.lines() {
        if !line?.trim().is_empty() {
            n += 1;
        }
    }
    Ok(n)
}

/// Reads a JSONL file, failing on the first malformed line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, records: impl IntoIterator<Item = &'a T>) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Append-only JSONL file shared between threads; writes are serialized.
pub struct JsonlAppender<T> {
    writer: Mutex<BufWriter<File>>,
    _record: PhantomData<fn(&T)>,
}

impl<T: Serialize> JsonlAppender<T> {
    pub fn open(path: &Path) -> Result<Self, CorpusError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { writer: Mutex::new(BufWriter::new(file)), _record: PhantomData })
    }

    pub fn append(&self, record: &T) -> Result<(), CorpusError> {
        let line = serde_json::to_string(record)?;
        let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&self) -> Result<(), CorpusError> {
        self.writer.lock().unwrap_or_else(|e| e.into_inner()).flush()?;
        Ok(())
    }
}

/// Raw row of the label CSV. `subcategory` is the label in force, `final`
/// the third annotator's resolution when the two annotators disagreed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub comment_id: String,
    #[serde(default)]
    pub subcategory: String,
    #[serde(default)]
    pub group: String,
    #[serde(default)]
    pub annotator_a: String,
    #[serde(default)]
    pub annotator_b: String,
    #[serde(default, rename = "final")]
    pub final_label: String,
}

impl LabelRow {
    pub fn from_label(comment_id: &str, label: Label) -> Self {
        Self {
            comment_id: comment_id.to_string(),
            subcategory: label.subcategory().map(|s| s.name().to_string()).unwrap_or_default(),
            group: label.group().to_string(),
            ..Default::default()
        }
    }

    pub fn label(&self) -> Result<Label, CorpusError> {
        let parse_sub = |s: &str| -> Result<Option<Subcategory>, CorpusError> {
            let s = s.trim();
            if s.is_empty() { Ok(None) } else { s.parse().map(Some) }
        };
        let sub = parse_sub(&self.subcategory)?;
        let fin = parse_sub(&self.final_label)?;
        let a = parse_sub(&self.annotator_a)?;
        let b = parse_sub(&self.annotator_b)?;
        if let (Some(s), Some(f)) = (sub, fin) {
            if s != f {
                return Err(CorpusError::InvalidRecord(format!(
                    "label of {}: subcategory {s} disagrees with final {f}",
                    self.comment_id
                )));
            }
        }
        let agreed = match (a, b) {
            (Some(a), Some(b)) if a == b => Some(a),
            _ => None,
        };
        let subcategory = sub.or(fin).or(agreed);
        let group = match self.group.trim() {
            "" => None,
            g => Some(g.parse::<Group>()?),
        };
        Label::checked(subcategory, group)
    }

    pub fn annotations(&self) -> Option<(Subcategory, Subcategory)> {
        let a = self.annotator_a.trim().parse().ok()?;
        let b = self.annotator_b.trim().parse().ok()?;
        Some((a, b))
    }
}

pub fn read_label_csv(path: &Path) -> Result<Vec<LabelRow>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn write_label_csv(path: &Path, rows: &[LabelRow]) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Inter-annotator agreement over rows carrying both annotations.
pub fn annotation_kappa(rows: &[LabelRow]) -> Option<f64> {
    let (a, b): (Vec<Subcategory>, Vec<Subcategory>) = rows.iter().filter_map(LabelRow::annotations).unzip();
    cohens_kappa(&a, &b).ok()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportSummary {
    pub comments: usize,
    pub labeled: usize,
    pub pairs: usize,
    pub group_counts: BTreeMap<Group, usize>,
    pub labels_without_comment: usize,
    pub invalid_comments: usize,
    pub kappa: Option<f64>,
}

impl ImportSummary {
    /// Group share in percent.
    pub fn percentage(&self, group: Group) -> f64 {
        let total: usize = self.group_counts.values().sum();
        if total == 0 {
            return 0.0;
        }
        100.0 * *self.group_counts.get(&group).unwrap_or(&0) as f64 / total as f64
    }
}

/// Imports a published dataset snapshot into `out` without re-mining.
pub fn import_dataset(
    labels_csv: &Path,
    comments_jsonl: &Path,
    pairs_jsonl: Option<&Path>,
    out: &Path,
) -> Result<ImportSummary, CorpusError> {
    let dir = DatasetDir::create(out)?;
    let mut summary = ImportSummary::default();

    let mut comments: Vec<ReviewComment> = read_jsonl(comments_jsonl)?;
    let before = comments.len();
    comments.retain(|c| match c.validate() {
        Ok(()) => true,
        Err(e) => {
            log::warn!("skipping comment: {e}");
            false
        }
    });
    summary.invalid_comments = before - comments.len();
    summary.comments = comments.len();
    let known: HashMap<&str, ()> = comments.iter().map(|c| (c.comment_id.as_str(), ())).collect();

    let rows = read_label_csv(labels_csv)?;
    let mut kept = Vec::with_capacity(rows.len());
    for row in rows {
        let label = row.label()?;
        if !known.contains_key(row.comment_id.as_str()) {
            summary.labels_without_comment += 1;
            continue;
        }
        *summary.group_counts.entry(label.group()).or_default() += 1;
        let mut normalized = LabelRow::from_label(&row.comment_id, label);
        normalized.annotator_a = row.annotator_a.clone();
        normalized.annotator_b = row.annotator_b.clone();
        normalized.final_label = row.final_label.clone();
        kept.push(normalized);
    }
    summary.labeled = kept.len();
    summary.kappa = annotation_kappa(&kept);

    write_jsonl(&dir.comments_path(), &comments)?;
    write_label_csv(&dir.labels_path(), &kept)?;

    if let Some(pairs) = pairs_jsonl {
        let inline: Vec<InlinePairRecord> = read_jsonl(pairs)?;
        let mut records = Vec::with_capacity(inline.len());
        for p in inline {
            records.push(PairRecord {
                source: p.source.as_deref().map(|t| dir.put_blob(t)).transpose()?,
                destination: p.destination.as_deref().map(|t| dir.put_blob(t)).transpose()?,
                comment_id: p.comment_id,
                file_path: p.file_path,
            });
        }
        summary.pairs = records.len();
        write_jsonl(&dir.pairs_path(), &records)?;
    }
    dir.rebuild_index()?;
    Ok(summary)
}
