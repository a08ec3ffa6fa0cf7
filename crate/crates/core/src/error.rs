use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Why a proof step was rejected by the prover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    UndefinedFact,
    TacticFailure,
    NoProgress,
    ParseError,
    Timeout,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::UndefinedFact,
        ErrorCategory::TacticFailure,
        ErrorCategory::NoProgress,
        ErrorCategory::ParseError,
        ErrorCategory::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::UndefinedFact => "undefined_fact",
            ErrorCategory::TacticFailure => "tactic_failure",
            ErrorCategory::NoProgress => "no_progress",
            ErrorCategory::ParseError => "parse_error",
            ErrorCategory::Timeout => "timeout",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == text)
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A syntax error in a formula or step. `position` is a 1-based column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at position {position}: expected {expected}, found {found}")]
pub struct ParseError {
    pub position: usize,
    pub expected: String,
    pub found: String,
}

impl ParseError {
    pub(crate) fn new(position: usize, expected: impl Into<String>, found: impl Into<String>) -> Self {
        ParseError { position, expected: expected.into(), found: found.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate entry id `{0}`")]
    DuplicateId(String),
    #[error("unknown theorem `{0}`")]
    UnknownTheorem(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid candidate: log-probability {0} must be finite and <= 0")]
pub struct InvalidLogProb(pub f64);
