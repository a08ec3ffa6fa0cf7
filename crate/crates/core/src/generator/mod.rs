//! Step generators: produce candidate next steps with log-probabilities.

mod dataset;
mod llm;
mod mock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::ProofState;
use crate::step::Candidate;

pub use dataset::DatasetGenerator;
pub use llm::{parse_completion, CompletionChoice, CompletionRequest, CompletionResponse, LlmGenerator};
pub use mock::{mock_generate, MockGenerator};

/// Environment variable naming the remote completion endpoint.
pub const ENDPOINT_ENV: &str = "STEPWISE_GENERATOR_ENDPOINT";

const PROMPT_HEADER: &str = "### Given the following Isabelle proof state, suggest the next proof step.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_candidates: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
    pub seed: u64,
    pub endpoint: Option<String>,
    /// Mock only: multiply weights by a seeded factor in [0.5, 2.0].
    pub perturb: bool,
    /// Remote only: concurrent requests allowed per client.
    pub max_in_flight: usize,
    /// Remote only: per-request timeout.
    pub request_timeout_ms: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_candidates: 128,
            temperature: 1.0,
            top_p: 0.95,
            max_tokens: 2048,
            seed: 0,
            endpoint: None,
            perturb: true,
            max_in_flight: 4,
            request_timeout_ms: 60_000,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.n_candidates == 0 {
            return Err(GeneratorError::Config("n_candidates must be at least 1".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GeneratorError::Config(format!("top_p must be in (0, 1], got {}", self.top_p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error("generator transport error: {0}")]
    Transport(String),
    #[error("generator returned no parseable step")]
    EmptyResult,
    #[error("bad generator response: {0}")]
    BadResponse(String),
    #[error("bad generator config: {0}")]
    Config(String),
}

pub trait StepGenerator {
    /// At most `n` distinct candidates for `state`.
    fn generate(&self, state: &ProofState, n: usize) -> Result<Vec<Candidate>, GeneratorError>;
}

impl<G: StepGenerator + ?Sized> StepGenerator for Box<G> {
    fn generate(&self, state: &ProofState, n: usize) -> Result<Vec<Candidate>, GeneratorError> {
        (**self).generate(state, n)
    }
}

/// Instruction prompt for the next-step model.
pub fn build_prompt(state: &ProofState) -> String {
    format!("{PROMPT_HEADER}\n### Input:\n{}\n### Response:\n", state.render())
}
