//! McCabe cyclomatic complexity over a whole source file.
//!
//! Complexity is one plus the number of decision points. For Python these
//! are `if`/`elif`, loops, each boolean operator, exception handlers,
//! conditional expressions and comprehension filters.

use super::grammar::{Grammar, ParseError};
use super::tree::Ast;

pub fn cyclomatic_complexity(ast: &Ast, grammar: &dyn Grammar) -> u32 {
    let decisions = ast.nodes().iter().filter(|n| grammar.is_decision_point(n.kind)).count();
    1 + decisions as u32
}

pub fn cyclomatic_of_source(text: &str, grammar: &dyn Grammar) -> Result<u32, ParseError> {
    Ok(cyclomatic_complexity(&grammar.parse(text)?, grammar))
}
