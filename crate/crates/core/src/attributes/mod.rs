//! Parsing, AST differencing and the 27-attribute vector.

pub mod cyclomatic;
pub mod diff;
pub mod extract;
pub mod grammar;
pub mod tree;

pub use cyclomatic::{cyclomatic_complexity, cyclomatic_of_source};
pub use diff::{diff_asts, ActionKind, AstMapping, EditAction};
pub use extract::{
    detect_magic_string_replacements, extract_attributes, extract_for_line, AttributeVector, Extraction,
    FileRevisionPair, ATTRIBUTE_COUNT, ATTRIBUTE_NAMES,
};
pub use grammar::{Grammar, NodeRole, ParseError, PythonGrammar};
pub use tree::{Ast, AstBuilder, AstNode, NodeId};
