//! Review Comment Range (RCR) construction and code-context extraction.
//!
//! The RCR is the window of `RCR_RADIUS` lines on either side of a comment's
//! anchor line, clamped to the file. Line numbers are 1-based and refer to
//! the full source file, not to a diff hunk.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RCR_RADIUS: u32 = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("comment line must be >= 1")]
    LineZero,
    #[error("source file {0} is empty")]
    EmptyFile(String),
    #[error("source file {0} is unavailable")]
    Unavailable(String),
    #[error("range {start}..={end} does not fit a file of {lines} lines")]
    RangeOutOfBounds { start: u32, end: u32, lines: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewCommentRange {
    pub file_path: String,
    pub comment_line: u32,
    pub start_line: u32,
    pub end_line: u32,
    /// The requested line was past the end of the file and was clamped.
    #[serde(default)]
    pub line_drift: bool,
}

impl ReviewCommentRange {
    /// Window around `comment_line` in a file of `line_count` lines.
    pub fn around(file_path: &str, line_count: u32, comment_line: u32) -> Result<Self, ContextError> {
        if comment_line == 0 {
            return Err(ContextError::LineZero);
        }
        if line_count == 0 {
            return Err(ContextError::EmptyFile(file_path.to_string()));
        }
        let line_drift = comment_line > line_count;
        let anchor = comment_line.min(line_count);
        Ok(Self {
            file_path: file_path.to_string(),
            comment_line: anchor,
            start_line: anchor.saturating_sub(RCR_RADIUS).max(1),
            end_line: (anchor + RCR_RADIUS).min(line_count),
            line_drift,
        })
    }

    pub fn line_count(&self) -> u32 {
        self.end_line - self.start_line + 1
    }

    pub fn contains(&self, line: u32) -> bool {
        (self.start_line..=self.end_line).contains(&line)
    }

    /// Whether the inclusive span `start..=end` overlaps the range.
    pub fn intersects(&self, start: u32, end: u32) -> bool {
        start <= self.end_line && end >= self.start_line
    }

    /// Same range widened by `extra` lines on each side, unclamped at the top.
    pub fn widened(&self, extra: u32) -> Self {
        Self {
            start_line: self.start_line.saturating_sub(extra).max(1),
            end_line: self.end_line + extra,
            ..self.clone()
        }
    }
}

/// Number of lines as seen by the context extractor; a trailing newline does
/// not open a new line.
pub fn line_count(source: &str) -> u32 {
    source.lines().count() as u32
}

/// Builds the RCR for a comment on `source`.
pub fn extract_rcr(file_path: &str, source: &str, comment_line: u32) -> Result<ReviewCommentRange, ContextError> {
    ReviewCommentRange::around(file_path, line_count(source), comment_line)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeContext {
    pub text: String,
    pub line_span: ReviewCommentRange,
}

impl CodeContext {
    pub fn line_count(&self) -> usize {
        self.text.split('\n').count()
    }
}

/// Verbatim slice of the RCR lines, joined by `\n`.
pub fn extract_context(source: Option<&str>, rcr: &ReviewCommentRange) -> Result<CodeContext, ContextError> {
    let source = source.ok_or_else(|| ContextError::Unavailable(rcr.file_path.clone()))?;
    let lines: Vec<&str> = source.lines().collect();
    let total = lines.len() as u32;
    if rcr.start_line == 0 || rcr.start_line > rcr.end_line || rcr.end_line > total {
        return Err(ContextError::RangeOutOfBounds { start: rcr.start_line, end: rcr.end_line, lines: total });
    }
    let slice = &lines[(rcr.start_line - 1) as usize..rcr.end_line as usize];
    Ok(CodeContext { text: slice.join("\n"), line_span: rcr.clone() })
}
