//! Classification of code review comments into five feedback groups.
//!
//! The crate covers the whole pipeline: mining review comments from a
//! Gerrit-style server, extracting the code context and AST-diff attributes
//! of each commented file, training a dual-encoder fusion classifier,
//! cross-validated evaluation, a random-forest baseline and reviewer
//! analytics over the predictions.

pub mod analytics;
pub mod attributes;
pub mod baseline;
pub mod classifier;
pub mod context;
pub mod corpus;
pub mod evaluation;
