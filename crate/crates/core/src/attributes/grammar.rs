//! Parser adapters. A [`Grammar`] turns source text into an [`Ast`] and tells
//! the extractor which node kinds play which syntactic role.

use std::collections::HashSet;
use std::sync::{Mutex, OnceLock};

use thiserror::Error;
use tree_sitter::{Node, Parser};

use super::tree::{Ast, AstBuilder};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("parse failure at {line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

/// Syntactic roles the attribute extractor cares about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    /// `if` statement or an `elif`-style conditional branch.
    IfBranch,
    Else,
    Try,
    Assert,
    StringLiteral,
    /// Identifier or dotted name usable in place of a literal.
    Name,
    Assignment,
    ArgumentList,
    Block,
    Other,
}

pub trait Grammar: Send + Sync {
    fn name(&self) -> &'static str;

    /// File extensions (with the dot) this grammar parses.
    fn extensions(&self) -> &[&'static str];

    fn parse(&self, text: &str) -> Result<Ast, ParseError>;

    fn role(&self, kind: &str) -> NodeRole;

    /// Node kinds that add one to McCabe complexity.
    fn is_decision_point(&self, kind: &str) -> bool;

    /// Field holding the assigned value in an assignment node.
    fn assignment_value_field(&self) -> &'static str;

    /// Whether `kind` is the call node owning an argument list.
    fn is_call(&self, kind: &str) -> bool;

    fn accepts_path(&self, path: &str) -> bool {
        let lower = path.to_ascii_lowercase();
        self.extensions().iter().any(|ext| lower.ends_with(ext))
    }
}

/// Python grammar backed by tree-sitter-python.
#[derive(Debug, Clone, Copy, Default)]
pub struct PythonGrammar;

impl PythonGrammar {
    fn parser() -> Parser {
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("tree-sitter-python is ABI compatible with the linked tree-sitter");
        parser
    }
}

impl Grammar for PythonGrammar {
    fn name(&self) -> &'static str {
        "python"
    }

    fn extensions(&self) -> &[&'static str] {
        &[".py"]
    }

    fn parse(&self, text: &str) -> Result<Ast, ParseError> {
        let tree = Self::parser().parse(text, None).ok_or_else(|| ParseError {
            line: 0,
            column: 0,
            message: "parser returned no tree".into(),
        })?;
        let root = tree.root_node();
        if root.has_error() {
            return Err(first_error(root));
        }
        let mut builder = AstBuilder::new();
        convert(root, None, text.as_bytes(), &mut builder);
        Ok(builder.finish())
    }

    fn role(&self, kind: &str) -> NodeRole {
        match kind {
            "if_statement" | "elif_clause" => NodeRole::IfBranch,
            "else_clause" => NodeRole::Else,
            "try_statement" => NodeRole::Try,
            "assert_statement" => NodeRole::Assert,
            "string" => NodeRole::StringLiteral,
            "identifier" | "attribute" => NodeRole::Name,
            "assignment" | "augmented_assignment" => NodeRole::Assignment,
            "argument_list" => NodeRole::ArgumentList,
            "block" => NodeRole::Block,
            _ => NodeRole::Other,
        }
    }

    fn is_decision_point(&self, kind: &str) -> bool {
        matches!(
            kind,
            "if_statement"
                | "elif_clause"
                | "for_statement"
                | "while_statement"
                | "boolean_operator"
                | "except_clause"
                | "except_group_clause"
                | "conditional_expression"
                | "if_clause"
        )
    }

    fn assignment_value_field(&self) -> &'static str {
        "right"
    }

    fn is_call(&self, kind: &str) -> bool {
        kind == "call"
    }
}

fn first_error(root: Node) -> ParseError {
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.is_error() || node.is_missing() {
            let pos = node.start_position();
            let message = if node.is_missing() {
                format!("missing {}", node.kind())
            } else {
                "unexpected input".to_string()
            };
            return ParseError { line: pos.row as u32 + 1, column: pos.column as u32 + 1, message };
        }
        if node.has_error() {
            let mut cursor = node.walk();
            let children: Vec<Node> = node.children(&mut cursor).collect();
            stack.extend(children.into_iter().rev());
        }
    }
    let pos = root.start_position();
    ParseError { line: pos.row as u32 + 1, column: pos.column as u32 + 1, message: "syntax error".into() }
}

/// Node kinds and field names come from a fixed grammar vocabulary, so
/// leaking each distinct name once is bounded.
fn intern(name: &str) -> &'static str {
    static NAMES: OnceLock<Mutex<HashSet<&'static str>>> = OnceLock::new();
    let mut names = NAMES.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    if let Some(known) = names.get(name) {
        return known;
    }
    let leaked: &'static str = Box::leak(name.to_owned().into_boxed_str());
    names.insert(leaked);
    leaked
}

fn line_span(node: Node) -> (u32, u32) {
    let start = node.start_position();
    let end = node.end_position();
    let start_line = start.row as u32 + 1;
    let end_line = if end.column == 0 && end.row > start.row { end.row as u32 } else { end.row as u32 + 1 };
    (start_line, end_line.max(start_line))
}

fn text<'a>(node: Node, source: &'a [u8]) -> &'a str {
    node.utf8_text(source).unwrap_or("")
}

/// String literal contents without prefix and quotes, so re-quoting does not
/// change the value.
fn string_value(node: Node, source: &[u8]) -> String {
    let mut cursor = node.walk();
    let children: Vec<Node> = node.children(&mut cursor).collect();
    let open = children.iter().find(|c| c.kind() == "string_start").map(|c| c.end_byte());
    let close = children.iter().rev().find(|c| c.kind() == "string_end").map(|c| c.start_byte());
    match (open, close) {
        (Some(a), Some(b)) if a <= b => String::from_utf8_lossy(&source[a..b]).into_owned(),
        _ => text(node, source).to_string(),
    }
}

fn convert(node: Node, field: Option<&str>, source: &[u8], builder: &mut AstBuilder) {
    let (start_line, end_line) = line_span(node);
    if node.kind() == "string" {
        builder.leaf("string", string_value(node, source), field.map(intern), start_line, end_line);
        return;
    }

    let mut cursor = node.walk();
    let mut operators = Vec::new();
    let mut named = Vec::new();
    for (i, child) in node.children(&mut cursor).enumerate() {
        let child_field = node.field_name_for_child(i as u32);
        if child.is_named() {
            if child.kind() != "line_continuation" {
                named.push((child, child_field));
            }
        } else if matches!(child_field, Some("operator") | Some("operators")) {
            operators.push(text(child, source).to_string());
        }
    }

    let value = if !operators.is_empty() {
        operators.join(" ")
    } else if node.child_count() == 0 {
        text(node, source).to_string()
    } else {
        String::new()
    };
    builder.open(intern(node.kind()), value, field.map(intern), start_line, end_line);
    for (child, child_field) in named {
        convert(child, child_field, source, builder);
    }
    builder.close();
}
