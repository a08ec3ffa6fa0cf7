//! Best-first proof search over a miniature interactive prover.

pub mod backend;
pub mod bench;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod filtering;
pub mod formula;
pub mod generator;
pub mod hammer;
pub mod protocol;
pub mod prover;
pub mod result;
pub mod revision;
pub mod search;
pub mod state;
pub mod step;
pub mod theory;

pub use backend::{BackendError, ProverBackend, SessionId, Snapshot, TheoryHandle};
pub use error::{ErrorCategory, ParseError, TheoryError};
pub use formula::{parse_formula, Formula};
pub use result::StepResult;
pub use state::{canonical_state, FactContext, ProofState, Subgoal};
pub use step::{parse_step, Candidate, Origin, ProofStep, Tactic};
pub use theory::{load_theory, Theory};
