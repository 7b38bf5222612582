//! The 27 code attributes computed from a source/destination file pair.

use serde::{Deserialize, Serialize};

use super::cyclomatic::cyclomatic_complexity;
use super::diff::{diff_asts, ActionKind, AstMapping, EditAction};
use super::grammar::{Grammar, NodeRole, ParseError};
use super::tree::{Ast, NodeId};
use crate::context::{self, ContextError, ReviewCommentRange};

pub const ATTRIBUTE_COUNT: usize = 27;

pub const ATTRIBUTE_NAMES: [&str; ATTRIBUTE_COUNT] = [
    "anyInserted",
    "anyDeleted",
    "getMovedSrcs",
    "updatedSrcs",
    "anythingInLineMoved",
    "anythingInLineUpdated",
    "anythingInLineDeleted",
    "anythingMovedIntoLine",
    "anythingInsertedIntoLine",
    "insertedIfConditions",
    "deletedIfConditions",
    "elseInserted",
    "elseDeleted",
    "entireLineMoved",
    "entireLineDeleted",
    "stringsUpdated",
    "magicStringsReplaced",
    "movedBlocksInIfConditions",
    "insertedAssertConditions",
    "insertedTryCatch",
    "removedTryCatch",
    "updatedValueAssignments",
    "updatedFunctionArguments",
    "hasNewFile",
    "hasOldFile",
    "cyclomaticComplexity",
    "commentLOC",
];

/// Attributes that depend on comparing both revisions.
pub const DIFF_ATTRIBUTE_COUNT: usize = 23;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeVector {
    #[serde(rename = "anyInserted")]
    pub any_inserted: u32,
    #[serde(rename = "anyDeleted")]
    pub any_deleted: u32,
    #[serde(rename = "getMovedSrcs")]
    pub get_moved_srcs: u32,
    #[serde(rename = "updatedSrcs")]
    pub updated_srcs: u32,
    #[serde(rename = "anythingInLineMoved")]
    pub anything_in_line_moved: u32,
    #[serde(rename = "anythingInLineUpdated")]
    pub anything_in_line_updated: u32,
    #[serde(rename = "anythingInLineDeleted")]
    pub anything_in_line_deleted: u32,
    #[serde(rename = "anythingMovedIntoLine")]
    pub anything_moved_into_line: u32,
    #[serde(rename = "anythingInsertedIntoLine")]
    pub anything_inserted_into_line: u32,
    #[serde(rename = "insertedIfConditions")]
    pub inserted_if_conditions: u32,
    #[serde(rename = "deletedIfConditions")]
    pub deleted_if_conditions: u32,
    #[serde(rename = "elseInserted")]
    pub else_inserted: u32,
    #[serde(rename = "elseDeleted")]
    pub else_deleted: u32,
    #[serde(rename = "entireLineMoved")]
    pub entire_line_moved: u32,
    #[serde(rename = "entireLineDeleted")]
    pub entire_line_deleted: u32,
    #[serde(rename = "stringsUpdated")]
    pub strings_updated: u32,
    #[serde(rename = "magicStringsReplaced")]
    pub magic_strings_replaced: u32,
    #[serde(rename = "movedBlocksInIfConditions")]
    pub moved_blocks_in_if_conditions: u32,
    #[serde(rename = "insertedAssertConditions")]
    pub inserted_assert_conditions: u32,
    #[serde(rename = "insertedTryCatch")]
    pub inserted_try_catch: u32,
    #[serde(rename = "removedTryCatch")]
    pub removed_try_catch: u32,
    #[serde(rename = "updatedValueAssignments")]
    pub updated_value_assignments: u32,
    #[serde(rename = "updatedFunctionArguments")]
    pub updated_function_arguments: u32,
    #[serde(rename = "hasNewFile")]
    pub has_new_file: u32,
    #[serde(rename = "hasOldFile")]
    pub has_old_file: u32,
    #[serde(rename = "cyclomaticComplexity")]
    pub cyclomatic_complexity: u32,
    #[serde(rename = "commentLOC")]
    pub comment_loc: u32,
}

impl AttributeVector {
    /// Values in [`ATTRIBUTE_NAMES`] order.
    pub fn to_array(&self) -> [u32; ATTRIBUTE_COUNT] {
        [
            self.any_inserted,
            self.any_deleted,
            self.get_moved_srcs,
            self.updated_srcs,
            self.anything_in_line_moved,
            self.anything_in_line_updated,
            self.anything_in_line_deleted,
            self.anything_moved_into_line,
            self.anything_inserted_into_line,
            self.inserted_if_conditions,
            self.deleted_if_conditions,
            self.else_inserted,
            self.else_deleted,
            self.entire_line_moved,
            self.entire_line_deleted,
            self.strings_updated,
            self.magic_strings_replaced,
            self.moved_blocks_in_if_conditions,
            self.inserted_assert_conditions,
            self.inserted_try_catch,
            self.removed_try_catch,
            self.updated_value_assignments,
            self.updated_function_arguments,
            self.has_new_file,
            self.has_old_file,
            self.cyclomatic_complexity,
            self.comment_loc,
        ]
    }

    pub fn from_array(v: [u32; ATTRIBUTE_COUNT]) -> Self {
        Self {
            any_inserted: v[0],
            any_deleted: v[1],
            get_moved_srcs: v[2],
            updated_srcs: v[3],
            anything_in_line_moved: v[4],
            anything_in_line_updated: v[5],
            anything_in_line_deleted: v[6],
            anything_moved_into_line: v[7],
            anything_inserted_into_line: v[8],
            inserted_if_conditions: v[9],
            deleted_if_conditions: v[10],
            else_inserted: v[11],
            else_deleted: v[12],
            entire_line_moved: v[13],
            entire_line_deleted: v[14],
            strings_updated: v[15],
            magic_strings_replaced: v[16],
            moved_blocks_in_if_conditions: v[17],
            inserted_assert_conditions: v[18],
            inserted_try_catch: v[19],
            removed_try_catch: v[20],
            updated_value_assignments: v[21],
            updated_function_arguments: v[22],
            has_new_file: v[23],
            has_old_file: v[24],
            cyclomatic_complexity: v[25],
            comment_loc: v[26],
        }
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        let i = ATTRIBUTE_NAMES.iter().position(|n| *n == name)?;
        Some(self.to_array()[i])
    }

    pub fn as_f32(&self) -> [f32; ATTRIBUTE_COUNT] {
        self.to_array().map(|x| x as f32)
    }

    /// The 23 diff-derived counts (everything except the four file-based
    /// attributes).
    pub fn diff_counts(&self) -> [u32; DIFF_ATTRIBUTE_COUNT] {
        let a = self.to_array();
        let mut out = [0; DIFF_ATTRIBUTE_COUNT];
        out.copy_from_slice(&a[..DIFF_ATTRIBUTE_COUNT]);
        out
    }
}

/// Source revision (commented on) and destination revision (finally merged).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRevisionPair {
    pub file_path: String,
    pub source: Option<String>,
    pub destination: Option<String>,
}

impl FileRevisionPair {
    pub fn new(file_path: impl Into<String>, source: Option<String>, destination: Option<String>) -> Self {
        Self { file_path: file_path.into(), source, destination }
    }

    /// Text the RCR is computed against: the source, or the destination when
    /// the source is missing.
    pub fn anchor_text(&self) -> Option<&str> {
        self.source.as_deref().or(self.destination.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub attributes: AttributeVector,
    /// Set when either revision failed to parse; diff-derived fields are then
    /// zero.
    pub parse_error: Option<ParseError>,
}

impl Extraction {
    pub fn parse_failed(&self) -> bool {
        self.parse_error.is_some()
    }
}

/// Builds the RCR for a comment line and extracts the attributes.
pub fn extract_for_line(
    pair: &FileRevisionPair,
    comment_line: u32,
    grammar: &dyn Grammar,
) -> Result<(ReviewCommentRange, Extraction), ContextError> {
    let text = pair.anchor_text().ok_or_else(|| ContextError::Unavailable(pair.file_path.clone()))?;
    // An empty file still gets a one-line range so file-level attributes exist.
    let lines = context::line_count(text).max(1);
    let rcr = ReviewCommentRange::around(&pair.file_path, lines, comment_line)?;
    let extraction = extract_attributes(pair, &rcr, grammar);
    Ok((rcr, extraction))
}

pub fn extract_attributes(pair: &FileRevisionPair, rcr: &ReviewCommentRange, grammar: &dyn Grammar) -> Extraction {
    let mut v = AttributeVector {
        has_old_file: pair.source.is_some() as u32,
        has_new_file: pair.destination.is_some() as u32,
        comment_loc: rcr.comment_line,
        ..Default::default()
    };
    let src = pair.source.as_deref().map(|t| grammar.parse(t));
    let dst = pair.destination.as_deref().map(|t| grammar.parse(t));

    let parse_error = [&src, &dst]
        .into_iter()
        .flatten()
        .find_map(|r| r.as_ref().err().cloned());

    if let Some(Ok(src_ast)) = &src {
        v.cyclomatic_complexity = cyclomatic_complexity(src_ast, grammar);
    }
    if let (Some(Ok(s)), Some(Ok(d))) = (&src, &dst) {
        let mapping = diff_asts(s, d);
        fill_diff_counts(&mut v, s, d, &mapping, rcr, grammar);
    }
    Extraction { attributes: v, parse_error }
}

/// Source string literals replaced by a name in the same syntactic slot.
pub fn detect_magic_string_replacements(src: &Ast, dst: &Ast, mapping: &AstMapping, grammar: &dyn Grammar) -> u32 {
    let mut count = 0;
    for s in 0..src.len() {
        if grammar.role(src.kind(s)) != NodeRole::StringLiteral || mapping.dst_of(s).is_some() {
            continue;
        }
        let Some(parent) = src.parent(s) else { continue };
        let Some(dst_parent) = mapping.dst_of(parent) else { continue };
        let slot = match src.node(s).field {
            Some(field) => dst.children(dst_parent).iter().copied().find(|&c| dst.node(c).field == Some(field)),
            None => src.child_index(s).and_then(|i| dst.children(dst_parent).get(i).copied()),
        };
        if slot.is_some_and(|d| grammar.role(dst.kind(d)) == NodeRole::Name) {
            count += 1;
        }
    }
    count
}

fn subtree_has_update(ast: &Ast, id: NodeId, mapping: &AstMapping) -> bool {
    ast.subtree(id).any(|n| mapping.src_action(n) == Some(ActionKind::Update))
}

fn fill_diff_counts(
    v: &mut AttributeVector,
    src: &Ast,
    dst: &Ast,
    mapping: &AstMapping,
    rcr: &ReviewCommentRange,
    grammar: &dyn Grammar,
) {
    let in_rcr = |s: NodeId| {
        let n = src.node(s);
        rcr.intersects(n.start_line, n.end_line)
    };
    // Destination parent mapped back to a source node inside the RCR.
    let lands_in_rcr = |d: NodeId| dst.parent(d).and_then(|p| mapping.src_of(p)).is_some_and(in_rcr);
    let is_if_block = |s: NodeId| {
        grammar.role(src.kind(s)) == NodeRole::Block
            && src
                .parent(s)
                .is_some_and(|p| matches!(grammar.role(src.kind(p)), NodeRole::IfBranch | NodeRole::Else))
    };

    for action in mapping.actions() {
        match *action {
            EditAction::Insert { dst: d } => {
                v.any_inserted += 1;
                if lands_in_rcr(d) {
                    v.anything_inserted_into_line += 1;
                }
                match grammar.role(dst.kind(d)) {
                    NodeRole::IfBranch => v.inserted_if_conditions += 1,
                    NodeRole::Else => v.else_inserted += 1,
                    NodeRole::Assert => v.inserted_assert_conditions += 1,
                    NodeRole::Try => v.inserted_try_catch += 1,
                    _ => {}
                }
            }
            EditAction::Delete { src: s } => {
                v.any_deleted += 1;
                if in_rcr(s) {
                    v.anything_in_line_deleted += 1;
                }
                match grammar.role(src.kind(s)) {
                    NodeRole::IfBranch => v.deleted_if_conditions += 1,
                    NodeRole::Else => v.else_deleted += 1,
                    NodeRole::Try => v.removed_try_catch += 1,
                    _ => {}
                }
            }
            EditAction::Move { src: s, dst: d } => {
                v.get_moved_srcs += 1;
                if in_rcr(s) {
                    v.anything_in_line_moved += 1;
                }
                if lands_in_rcr(d) {
                    v.anything_moved_into_line += 1;
                }
                if is_if_block(s) || src.parent(s).is_some_and(is_if_block) {
                    v.moved_blocks_in_if_conditions += 1;
                }
            }
            EditAction::Update { src: s, .. } => {
                v.updated_srcs += 1;
                if in_rcr(s) {
                    v.anything_in_line_updated += 1;
                }
                if grammar.role(src.kind(s)) == NodeRole::StringLiteral {
                    v.strings_updated += 1;
                }
            }
        }
    }

    v.magic_strings_replaced = detect_magic_string_replacements(src, dst, mapping, grammar);

    let value_field = grammar.assignment_value_field();
    for s in 0..src.len() {
        match grammar.role(src.kind(s)) {
            NodeRole::Assignment if mapping.dst_of(s).is_some() => {
                let rhs = src.children(s).iter().copied().find(|&c| src.node(c).field == Some(value_field));
                if rhs.is_some_and(|r| subtree_has_update(src, r, mapping)) {
                    v.updated_value_assignments += 1;
                }
            }
            NodeRole::ArgumentList if src.parent(s).is_some_and(|p| grammar.is_call(src.kind(p))) => {
                v.updated_function_arguments +=
                    src.children(s).iter().filter(|&&a| subtree_has_update(src, a, mapping)).count() as u32;
            }
            _ => {}
        }
    }

    let (moved_lines, deleted_lines) = whole_line_counts(src, mapping, rcr);
    v.entire_line_moved = moved_lines;
    v.entire_line_deleted = deleted_lines;
}

/// Lines of the RCR whose every token is covered by a move (respectively a
/// delete). Tokens are the leaves touching the line; lines without tokens are
/// not counted.
fn whole_line_counts(src: &Ast, mapping: &AstMapping, rcr: &ReviewCommentRange) -> (u32, u32) {
    let moved_cover = |leaf: NodeId| {
        mapping.dst_of(leaf).is_some()
            && (mapping.src_action(leaf) == Some(ActionKind::Move)
                || src.ancestors(leaf).any(|a| mapping.src_action(a) == Some(ActionKind::Move)))
    };
    let span = (rcr.end_line - rcr.start_line + 1) as usize;
    // (tokens, moved, deleted) per RCR line.
    let mut tally = vec![(0u32, 0u32, 0u32); span];
    for leaf in src.leaves() {
        let n = src.node(leaf);
        if !rcr.intersects(n.start_line, n.end_line) {
            continue;
        }
        let moved = moved_cover(leaf);
        let deleted = mapping.src_action(leaf) == Some(ActionKind::Delete);
        for line in n.start_line.max(rcr.start_line)..=n.end_line.min(rcr.end_line) {
            let t = &mut tally[(line - rcr.start_line) as usize];
            t.0 += 1;
            t.1 += moved as u32;
            t.2 += deleted as u32;
        }
    }
    let moved = tally.iter().filter(|t| t.0 > 0 && t.1 == t.0).count() as u32;
    let deleted = tally.iter().filter(|t| t.0 > 0 && t.2 == t.0).count() as u32;
    (moved, deleted)
}
