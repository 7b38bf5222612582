//! Turns stored comments, labels and file pairs into model-ready samples.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::{LabeledSample, ReviewComment, SampleMetadata};
use super::store::{read_jsonl, write_jsonl, DatasetDir};
use super::CorpusError;
use crate::attributes::{extract_for_line, AttributeVector, FileRevisionPair, Grammar, ATTRIBUTE_NAMES};
use crate::context::{extract_context, CodeContext};
use crate::corpus::Label;

/// Default extension allowlist for source-related comments.
pub const DEFAULT_EXTENSIONS: &[&str] = &[".py"];

/// Attributes and context of one comment, before labels are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFeatures {
    pub context: Option<CodeContext>,
    pub attributes: AttributeVector,
    pub metadata: SampleMetadata,
}

pub fn compute_features(comment: &ReviewComment, pair: Option<&FileRevisionPair>, grammar: &dyn Grammar) -> SampleFeatures {
    let line = comment.anchor_line();
    let missing = || SampleFeatures {
        context: None,
        attributes: AttributeVector { comment_loc: line, ..Default::default() },
        metadata: SampleMetadata { context_unavailable: true, ..Default::default() },
    };
    let Some(pair) = pair else { return missing() };
    let Ok((rcr, extraction)) = extract_for_line(pair, line, grammar) else { return missing() };
    let context = extract_context(pair.anchor_text(), &rcr).ok();
    SampleFeatures {
        metadata: SampleMetadata {
            parse_failed: extraction.parse_failed(),
            line_drift: rcr.line_drift,
            context_unavailable: context.is_none(),
        },
        context,
        attributes: extraction.attributes,
    }
}

/// Keeps comments on parseable files whose extension is allowlisted and
/// marks them source related.
pub fn filter_source_related(samples: Vec<LabeledSample>, extensions: &[impl AsRef<str>]) -> Vec<LabeledSample> {
    samples
        .into_iter()
        .filter(|s| has_allowed_extension(&s.comment.file_path, extensions) && !s.metadata.parse_failed)
        .map(|mut s| {
            s.is_source_related = true;
            s
        })
        .collect()
}

pub fn has_allowed_extension(path: &str, extensions: &[impl AsRef<str>]) -> bool {
    let lower = path.to_ascii_lowercase();
    extensions.iter().any(|e| lower.ends_with(&e.as_ref().to_ascii_lowercase()))
}

/// Row of the cached `contexts.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedFeatures {
    comment_id: String,
    context: Option<CodeContext>,
    metadata: SampleMetadata,
}

pub struct LoadOptions<'a> {
    pub grammar: &'a dyn Grammar,
    pub extensions: Vec<String>,
    /// Reuse `attributes.csv` and `contexts.jsonl` when they cover every
    /// labeled comment.
    pub use_cache: bool,
}

impl<'a> LoadOptions<'a> {
    pub fn new(grammar: &'a dyn Grammar) -> Self {
        Self { grammar, extensions: DEFAULT_EXTENSIONS.iter().map(|s| s.to_string()).collect(), use_cache: true }
    }
}

/// Every labeled comment with features, before filtering.
pub fn build_samples(dir: &DatasetDir, opts: &LoadOptions) -> Result<Vec<LabeledSample>, CorpusError> {
    let comments: HashMap<String, ReviewComment> =
        dir.read_comments()?.into_iter().map(|c| (c.comment_id.clone(), c)).collect();
    let labels = dir.read_labels()?;
    let cache = if opts.use_cache { read_feature_cache(dir)? } else { None };
    let pairs = if cache.is_some() { HashMap::new() } else { dir.read_pairs()? };

    let mut out = Vec::with_capacity(labels.len());
    for row in &labels {
        let Some(comment) = comments.get(&row.comment_id) else {
            log::warn!("label for unknown comment {}", row.comment_id);
            continue;
        };
        let label: Label = row.label()?;
        let features = match cache.as_ref().and_then(|c| c.get(&row.comment_id)) {
            Some(f) => f.clone(),
            None => compute_features(comment, pairs.get(&row.comment_id), opts.grammar),
        };
        let mut sample = LabeledSample::new(comment.clone(), label, features.context, features.attributes);
        sample.metadata = features.metadata;
        out.push(sample);
    }
    Ok(out)
}

/// Labeled, source-related samples ready for training.
pub fn load_samples(dir: &DatasetDir, opts: &LoadOptions) -> Result<Vec<LabeledSample>, CorpusError> {
    Ok(filter_source_related(build_samples(dir, opts)?, &opts.extensions))
}

fn read_feature_cache(dir: &DatasetDir) -> Result<Option<HashMap<String, SampleFeatures>>, CorpusError> {
    if !dir.attributes_path().exists() || !dir.contexts_path().exists() {
        return Ok(None);
    }
    let attrs: HashMap<String, AttributeVector> =
        read_attributes_csv(&dir.attributes_path())?.into_iter().map(|r| (r.comment_id, r.attributes)).collect();
    let contexts: Vec<CachedFeatures> = read_jsonl(&dir.contexts_path())?;
    let mut out = HashMap::with_capacity(contexts.len());
    for c in contexts {
        let Some(attributes) = attrs.get(&c.comment_id) else { continue };
        out.insert(c.comment_id, SampleFeatures { context: c.context, attributes: *attributes, metadata: c.metadata });
    }
    Ok(Some(out))
}

/// Writes the feature cache for `samples` into the dataset directory.
pub fn write_feature_cache(dir: &DatasetDir, samples: &[LabeledSample]) -> Result<(), CorpusError> {
    let rows: Vec<AttributeRow> = samples.iter().map(AttributeRow::from_sample).collect();
    write_attributes_csv(&dir.attributes_path(), &rows)?;
    let cached: Vec<CachedFeatures> = samples
        .iter()
        .map(|s| CachedFeatures { comment_id: s.comment_id().to_string(), context: s.context.clone(), metadata: s.metadata })
        .collect();
    write_jsonl(&dir.contexts_path(), &cached)
}

/// One row of `attributes.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeRow {
    pub comment_id: String,
    pub attributes: AttributeVector,
    pub parse_failed: bool,
}

impl AttributeRow {
    pub fn from_sample(s: &LabeledSample) -> Self {
        Self { comment_id: s.comment_id().to_string(), attributes: s.attributes, parse_failed: s.metadata.parse_failed }
    }
}

pub fn write_attributes_csv(path: &Path, rows: &[AttributeRow]) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["comment_id"];
    header.extend(ATTRIBUTE_NAMES);
    header.push("parse_failed");
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.comment_id.clone()];
        rec.extend(r.attributes.to_array().iter().map(|v| v.to_string()));
        rec.push(u8::from(r.parse_failed).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_attributes_csv(path: &Path) -> Result<Vec<AttributeRow>, CorpusError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::InvalidRecord(format!("{}: missing column {name}", path.display())))
    };
    let id_col = col("comment_id")?;
    let flag_col = col("parse_failed")?;
    let attr_cols = ATTRIBUTE_NAMES.iter().map(|n| col(n)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |m: String| CorpusError::Malformed { path: path.display().to_string(), line: i + 2, message: m };
        let mut values = [0u32; ATTRIBUTE_NAMES.len()];
        for (slot, &c) in values.iter_mut().zip(&attr_cols) {
            *slot = rec.get(c).unwrap_or("").parse().map_err(|e| bad(format!("{e}")))?;
        }
        rows.push(AttributeRow {
            comment_id: rec.get(id_col).unwrap_or("").to_string(),
            attributes: AttributeVector::from_array(values),
            parse_failed: matches!(rec.get(flag_col), Some("1") | Some("true")),
        });
    }
    Ok(rows)
}

/// Removes stale feature caches, e.g. after re-importing pairs.
pub fn clear_feature_cache(dir: &DatasetDir) -> Result<(), CorpusError> {
    for p in [dir.attributes_path(), dir.contexts_path()] {
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::PythonGrammar;
    use crate::corpus::store::{import_dataset, InlinePairRecord};
    use crate::corpus::Group;

    fn comment(id: &str, path: &str, line: u32) -> ReviewComment {
        ReviewComment {
            comment_id: id.into(),
            change_id: "7".into(),
            patchset_number: 1,
            file_path: path.into(),
            line,
            author_id: "rev".into(),
            text: "why?".into(),
            thread_parent: None,
            range: None,
        }
    }

    fn fixture() -> (tempfile::TempDir, DatasetDir) {
        let tmp = tempfile::tempdir().unwrap();
        let comments = vec![
            comment("ok", "nova/a.py", 2),
            comment("msg", "/COMMIT_MSG", 3),
            comment("broken", "nova/b.py", 1),
            comment("gone", "nova/c.py", 0),
        ];
        let cpath = tmp.path().join("c.jsonl");
        write_jsonl(&cpath, &comments).unwrap();
        let lpath = tmp.path().join("l.csv");
        fs::write(
            &lpath,
            "comment_id,subcategory,group,annotator_a,annotator_b,final\n\
             ok,Logical,,,,\nmsg,Documentation,,,,\nbroken,Question,,,,\ngone,Praise,,,,\n",
        )
        .unwrap();
        let pairs = vec![
            InlinePairRecord {
                comment_id: "ok".into(),
                file_path: "nova/a.py".into(),
                source: Some("x = 1\ny = 2\n".into()),
                destination: Some("x = 1\nif y:\n    y = 3\n".into()),
            },
            InlinePairRecord {
                comment_id: "msg".into(),
                file_path: "/COMMIT_MSG".into(),
                source: Some("Fix thing\n\nLonger text\n".into()),
                destination: None,
            },
            InlinePairRecord {
                comment_id: "broken".into(),
                file_path: "nova/b.py".into(),
                source: Some("def f(:\n".into()),
                destination: None,
            },
        ];
        let ppath = tmp.path().join("p.jsonl");
        write_jsonl(&ppath, &pairs).unwrap();
        let out = tmp.path().join("ds");
        import_dataset(&lpath, &cpath, Some(&ppath), &out).unwrap();
        (tmp, DatasetDir::open(out))
    }

    #[test]
    fn builds_and_filters() {
        let (_tmp, dir) = fixture();
        let opts = LoadOptions::new(&PythonGrammar);
        let all = build_samples(&dir, &opts).unwrap();
        assert_eq!(all.len(), 4);
        let by_id: HashMap<_, _> = all.iter().map(|s| (s.comment_id().to_string(), s)).collect();
        assert!(by_id["broken"].metadata.parse_failed);
        assert!(by_id["gone"].metadata.context_unavailable);
        assert_eq!(by_id["gone"].attributes.comment_loc, 1);
        assert_eq!(by_id["ok"].attributes.inserted_if_conditions, 1);
        assert_eq!(by_id["ok"].context.as_ref().unwrap().text, "x = 1\ny = 2");

        let kept = load_samples(&dir, &opts).unwrap();
        let ids: Vec<_> = kept.iter().map(|s| s.comment_id()).collect();
        assert_eq!(ids, ["ok", "gone"]);
        assert!(kept.iter().all(|s| s.is_source_related));
        assert_eq!(kept[0].group(), Group::Functional);
    }

    #[test]
    fn cache_round_trip() {
        let (_tmp, dir) = fixture();
        let opts = LoadOptions::new(&PythonGrammar);
        let fresh = build_samples(&dir, &opts).unwrap();
        write_feature_cache(&dir, &fresh).unwrap();
        // Pairs are no longer read once the cache exists.
        fs::remove_file(dir.pairs_path()).unwrap();
        let cached = build_samples(&dir, &opts).unwrap();
        assert_eq!(fresh, cached);
        clear_feature_cache(&dir).unwrap();
        assert!(!dir.attributes_path().exists());
    }

    #[test]
    fn empty_input_filters_to_empty() {
        assert!(filter_source_related(Vec::new(), DEFAULT_EXTENSIONS).is_empty());
    }
}
