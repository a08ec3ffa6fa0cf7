use crate::error::ErrorCategory;
use crate::state::ProofState;

/// Outcome of executing one step. A `Success` always changes the canonical state.
#[derive(Debug, Clone, PartialEq)]
pub enum StepResult {
    Success(ProofState),
    Failure { category: ErrorCategory, detail: String },
}

impl StepResult {
    pub fn failure(category: ErrorCategory, detail: impl Into<String>) -> Self {
        StepResult::Failure { category, detail: detail.into() }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, StepResult::Success(_))
    }

    pub fn state(&self) -> Option<&ProofState> {
        match self {
            StepResult::Success(s) => Some(s),
            StepResult::Failure { .. } => None,
        }
    }

    pub fn category(&self) -> Option<ErrorCategory> {
        match self {
            StepResult::Success(_) => None,
            StepResult::Failure { category, .. } => Some(*category),
        }
    }

    /// Comparison key: the canonical state on success, the category on failure.
    pub fn canonical(&self) -> String {
        match self {
            StepResult::Success(s) => format!("ok:{}", s.key()),
            StepResult::Failure { category, .. } => format!("err:{category}"),
        }
    }
}
