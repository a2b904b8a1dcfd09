use thiserror::Error;

use crate::cell::ObjId;

/// Failures of the data-model constructors and cell algebra.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("endpoint mismatch: left target {left_target} differs from right source {right_source}")]
    EndpointMismatch { left_target: ObjId, right_source: ObjId },
    #[error("operands are not parallel")]
    NotParallel,
    #[error("unknown cell reference `{0}`")]
    UnknownName(String),
    #[error("duplicate {dim}-cell name `{name}`")]
    DuplicateName { dim: usize, name: String },
    #[error("invalid identifier `{0}`")]
    InvalidName(String),
    #[error("ill-typed word: {0}")]
    IllTyped(String),
    #[error("rule `{0}`: {1}")]
    BadRule(String, String),
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    Unsupported(String),
}

/// A positioned error from the DSL reader. Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        SyntaxError { line, column, message: message.into() }
    }
}
