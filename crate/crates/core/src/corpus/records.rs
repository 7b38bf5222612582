use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::rubric::{Group, Subcategory};
use super::CorpusError;
use crate::attributes::AttributeVector;
use crate::context::CodeContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChangeStatus {
    Merged,
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSetRef {
    pub number: u32,
    /// Commit sha of the patchset revision.
    pub revision: String,
}

/// A closed change mined from the review server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub change_id: String,
    pub project: String,
    pub status: ChangeStatus,
    pub created_at: DateTime<Utc>,
    pub patchsets: Vec<PatchSetRef>,
}

impl ChangeRecord {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let increasing = self.patchsets.windows(2).all(|w| w[0].number < w[1].number);
        if !increasing {
            return Err(CorpusError::InvalidRecord(format!(
                "change {}: patchset numbers are not strictly increasing",
                self.change_id
            )));
        }
        Ok(())
    }

    pub fn latest_patchset(&self) -> Option<&PatchSetRef> {
        self.patchsets.last()
    }
}

/// Inclusive line span of a range comment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRange {
    pub start_line: u32,
    pub end_line: u32,
}

/// One inline review remark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewComment {
    pub comment_id: String,
    pub change_id: String,
    pub patchset_number: u32,
    pub file_path: String,
    /// 0 marks a file-level comment.
    pub line: u32,
    pub author_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread_parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<CommentRange>,
}

impl ReviewComment {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |why: &str| {
            Err(CorpusError::InvalidRecord(format!("comment {}: {why}", self.comment_id)))
        };
        if self.comment_id.is_empty() {
            return Err(CorpusError::InvalidRecord("comment with empty id".into()));
        }
        if self.patchset_number < 1 {
            return fail("patchset number must be >= 1");
        }
        if self.text.trim().is_empty() {
            return fail("empty comment text");
        }
        if self.thread_parent.as_deref() == Some(self.comment_id.as_str()) {
            return fail("comment replies to itself");
        }
        Ok(())
    }

    /// Line the code context is centred on. Range comments anchor on the
    /// range's last line; file-level comments anchor on line 1.
    pub fn anchor_line(&self) -> u32 {
        let line = self.range.map(|r| r.end_line).unwrap_or(self.line);
        line.max(1)
    }
}

/// Checks thread links: every parent must be an earlier comment on the same
/// file. Returns the ids of comments violating that.
pub fn invalid_thread_links(comments: &[ReviewComment]) -> Vec<String> {
    let mut seen: std::collections::HashMap<&str, &str> = std::collections::HashMap::new();
    let mut bad = Vec::new();
    for c in comments {
        if let Some(parent) = &c.thread_parent {
            match seen.get(parent.as_str()) {
                Some(path) if *path == c.file_path => {}
                _ => bad.push(c.comment_id.clone()),
            }
        }
        seen.insert(&c.comment_id, &c.file_path);
    }
    bad
}

/// Flags recorded while turning a labeled comment into a model-ready sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub parse_failed: bool,
    pub line_drift: bool,
    pub context_unavailable: bool,
}

/// A labeled comment together with everything the model consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub comment: ReviewComment,
    subcategory: Option<Subcategory>,
    group: Group,
    pub context: Option<CodeContext>,
    pub attributes: AttributeVector,
    pub is_source_related: bool,
    #[serde(default)]
    pub metadata: SampleMetadata,
}

impl LabeledSample {
    pub fn new(
        comment: ReviewComment,
        label: Label,
        context: Option<CodeContext>,
        attributes: AttributeVector,
    ) -> Self {
        Self {
            comment,
            subcategory: label.subcategory,
            group: label.group,
            context,
            attributes,
            is_source_related: false,
            metadata: SampleMetadata::default(),
        }
    }

    pub fn subcategory(&self) -> Option<Subcategory> {
        self.subcategory
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn comment_id(&self) -> &str {
        &self.comment.comment_id
    }
}

/// Final label of one comment. `group` always agrees with the subcategory
/// when one is known; group-only labels are accepted for datasets that were
/// published without the fine-grained column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    subcategory: Option<Subcategory>,
    group: Group,
}

impl Label {
    pub fn from_subcategory(subcategory: Subcategory) -> Self {
        Self { subcategory: Some(subcategory), group: subcategory.group() }
    }

    pub fn group_only(group: Group) -> Self {
        Self { subcategory: None, group }
    }

    /// Builds a label from both columns, rejecting disagreement.
    pub fn checked(subcategory: Option<Subcategory>, group: Option<Group>) -> Result<Self, CorpusError> {
        match (subcategory, group) {
            (Some(s), Some(g)) if s.group() != g => Err(CorpusError::LabelMismatch {
                subcategory: s.name().to_string(),
                group: g.to_string(),
            }),
            (Some(s), _) => Ok(Self::from_subcategory(s)),
            (None, Some(g)) => Ok(Self::group_only(g)),
            (None, None) => Err(CorpusError::UnknownLabel(String::new())),
        }
    }

    pub fn subcategory(&self) -> Option<Subcategory> {
        self.subcategory
    }

    pub fn group(&self) -> Group {
        self.group
    }
}
