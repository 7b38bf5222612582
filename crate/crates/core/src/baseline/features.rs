//! Attribute set of the change-classification baseline, mapped onto the
//! Python grammar.
//!
//! The original set was defined for Java with ChangeDistiller change types.
//! The table below is the mapping used here; all counts are taken over the
//! whole file, not only the commented range.
//!
//! | # | Baseline attribute            | Python equivalent                                                  |
//! |---|-------------------------------|--------------------------------------------------------------------|
//! | 0 | statement_insert              | inserted `*_statement` / `*_definition` nodes                      |
//! | 1 | statement_delete              | deleted statement nodes                                            |
//! | 2 | statement_update              | simple statements (no `block` child) with an update inside         |
//! | 3 | statement_parent_change       | moved statements whose parent is not the image of the old parent   |
//! | 4 | statement_ordering_change     | moved statements that kept their parent                            |
//! | 5 | condition_expression_change   | any action inside the `condition` of `if`/`elif`/`while`           |
//! | 6 | alternative_part_insert       | inserted `else_clause` under an `if_statement`                     |
//! | 7 | alternative_part_delete       | deleted `else_clause` under an `if_statement`                      |
//! | 8 | additional_functionality      | inserted `function_definition`                                     |
//! | 9 | removed_functionality         | deleted `function_definition`                                      |
//! |10 | parameter_insert              | inserted children of `parameters`                                  |
//! |11 | parameter_delete              | deleted children of `parameters`                                   |
//! |12 | return_type_change            | any action inside a `return_type` annotation                       |
//! |13 | comment_change                | inserted, deleted or updated `comment` nodes and docstrings        |
//! |14 | lines_added                   | added lines of a line diff                                         |
//! |15 | lines_removed                 | removed lines of a line diff                                       |
//! |16 | source_loc                    | lines of the source revision                                       |
//! |17 | source_complexity             | McCabe complexity of the source revision                           |
//!
//! Java-only change types (class/interface modifiers, `throws` clauses,
//! field visibility, generics) have no Python counterpart and are left out;
//! none of them is emitted as a constant column because a constant column
//! never affects a random forest.
//!
//! Rows 0-15 are zero when the destination is absent (no change after the
//! comment). A parse failure zero-fills every AST-derived row and sets the
//! flag.

use serde::{Deserialize, Serialize};
use similar::{ChangeTag, TextDiff};

use crate::attributes::{cyclomatic_complexity, diff_asts, ActionKind, Ast, AstMapping, EditAction, FileRevisionPair, Grammar, NodeId};
use crate::context::line_count;

pub const BASELINE_ATTRIBUTE_NAMES: [&str; 18] = [
    "statement_insert",
    "statement_delete",
    "statement_update",
    "statement_parent_change",
    "statement_ordering_change",
    "condition_expression_change",
    "alternative_part_insert",
    "alternative_part_delete",
    "additional_functionality",
    "removed_functionality",
    "parameter_insert",
    "parameter_delete",
    "return_type_change",
    "comment_change",
    "lines_added",
    "lines_removed",
    "source_loc",
    "source_complexity",
];

pub const BASELINE_ATTRIBUTE_COUNT: usize = BASELINE_ATTRIBUTE_NAMES.len();

/// Rows that describe the change between the two revisions.
pub const CHANGE_ATTRIBUTE_COUNT: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineVector {
    pub values: [u32; BASELINE_ATTRIBUTE_COUNT],
    pub parse_failed: bool,
}

impl BaselineVector {
    pub fn get(&self, name: &str) -> Option<u32> {
        BASELINE_ATTRIBUTE_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }

    pub fn change_counts(&self) -> &[u32] {
        &self.values[..CHANGE_ATTRIBUTE_COUNT]
    }
}

fn is_statement(kind: &str) -> bool {
    kind.ends_with("_statement") || kind.ends_with("_definition")
}

fn is_simple_statement(ast: &Ast, id: NodeId) -> bool {
    is_statement(ast.kind(id)) && !ast.children(id).iter().any(|&c| ast.kind(c) == "block")
}

/// A string expression statement opening a block.
fn is_docstring(ast: &Ast, id: NodeId) -> bool {
    let node = ast.node(id);
    node.kind == "expression_statement"
        && node.children.len() == 1
        && ast.kind(node.children[0]) == "string"
        && node.parent.is_some_and(|p| ast.kind(p) == "block" || ast.kind(p) == "module")
        && ast.child_index(id) == Some(0)
}

fn within_field(ast: &Ast, id: NodeId, field: &str, owners: &[&str]) -> bool {
    let mut cur = id;
    loop {
        let node = ast.node(cur);
        let Some(parent) = node.parent else { return false };
        if node.field == Some(field) && owners.contains(&ast.kind(parent)) {
            return true;
        }
        cur = parent;
    }
}

fn change_counts(src: &Ast, dst: &Ast, m: &AstMapping, out: &mut [u32; BASELINE_ATTRIBUTE_COUNT]) {
    const CONDITION_OWNERS: [&str; 3] = ["if_statement", "elif_clause", "while_statement"];
    let mut updated_statements = std::collections::BTreeSet::new();
    for action in m.actions() {
        // Node on the side where the action is visible.
        let (ast, id) = match *action {
            EditAction::Insert { dst: d } => (dst, d),
            EditAction::Delete { src: s } | EditAction::Update { src: s, .. } | EditAction::Move { src: s, .. } => (src, s),
        };
        let kind = ast.kind(id);
        match *action {
            EditAction::Insert { .. } if is_statement(kind) => out[0] += 1,
            EditAction::Delete { .. } if is_statement(kind) => out[1] += 1,
            EditAction::Move { src: s, dst: d } if is_statement(kind) => {
                let same_parent = match (src.parent(s), dst.parent(d)) {
                    (Some(ps), Some(pd)) => m.dst_of(ps) == Some(pd),
                    _ => false,
                };
                out[if same_parent { 4 } else { 3 }] += 1;
            }
            _ => {}
        }
        if action.kind() == ActionKind::Update {
            if let Some(stmt) = std::iter::once(id).chain(src.ancestors(id)).find(|&a| is_simple_statement(src, a)) {
                updated_statements.insert(stmt);
            }
        }
        if within_field(ast, id, "condition", &CONDITION_OWNERS) {
            out[5] += 1;
        }
        let parent_kind = ast.parent(id).map(|p| ast.kind(p));
        match (action.kind(), kind) {
            (ActionKind::Insert, "else_clause") if parent_kind == Some("if_statement") => out[6] += 1,
            (ActionKind::Delete, "else_clause") if parent_kind == Some("if_statement") => out[7] += 1,
            (ActionKind::Insert, "function_definition") => out[8] += 1,
            (ActionKind::Delete, "function_definition") => out[9] += 1,
            _ => {}
        }
        if parent_kind == Some("parameters") {
            match action.kind() {
                ActionKind::Insert => out[10] += 1,
                ActionKind::Delete => out[11] += 1,
                _ => {}
            }
        }
        if within_field(ast, id, "return_type", &["function_definition"]) {
            out[12] += 1;
        }
        let doc = kind == "comment" || is_docstring(ast, id) || ast.parent(id).is_some_and(|p| is_docstring(ast, p));
        if doc && action.kind() != ActionKind::Move {
            out[13] += 1;
        }
    }
    out[2] = updated_statements.len() as u32;
}

fn line_changes(src: &str, dst: &str) -> (u32, u32) {
    let diff = TextDiff::from_lines(src, dst);
    let mut added = 0;
    let mut removed = 0;
    for change in diff.iter_all_changes() {
        match change.tag() {
            ChangeTag::Insert => added += 1,
            ChangeTag::Delete => removed += 1,
            ChangeTag::Equal => {}
        }
    }
    (added, removed)
}

/// Baseline attributes of one file pair. Only file contents are read.
pub fn extract_baseline_attributes(pair: &FileRevisionPair, grammar: &dyn Grammar) -> BaselineVector {
    let mut values = [0u32; BASELINE_ATTRIBUTE_COUNT];
    let src = pair.source.as_deref().map(|t| (t, grammar.parse(t)));
    let dst = pair.destination.as_deref().map(|t| (t, grammar.parse(t)));
    let parse_failed = [&src, &dst].into_iter().flatten().any(|(_, r)| r.is_err());

    if let Some((text, parsed)) = &src {
        values[16] = line_count(text);
        if let Ok(ast) = parsed {
            values[17] = cyclomatic_complexity(ast, grammar);
        }
    }
    if let (Some((s_text, s)), Some((d_text, d))) = (&src, &dst) {
        let (added, removed) = line_changes(s_text, d_text);
        values[14] = added;
        values[15] = removed;
        if let (Ok(s), Ok(d)) = (s, d) {
            change_counts(s, d, &diff_asts(s, d), &mut values);
        }
    }
    BaselineVector { values, parse_failed }
}
