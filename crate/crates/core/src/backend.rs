//! The prover interface the search engine drives. Implemented in-process by
//! [`crate::prover::ToyProver`] and over the wire by
//! [`crate::protocol::RemoteBackend`].

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::TheoryError;
use crate::prover::{CexResult, HammerConfig, HammerResult};
use crate::result::StepResult;
use crate::state::ProofState;
use crate::step::ProofStep;
use crate::theory::Theory;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Token returned by `clone`; `restore` brings a session back to that state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Snapshot(pub String);

/// A theory known to a backend, addressed by its source digest.
#[derive(Debug, Clone)]
pub struct TheoryHandle {
    pub digest: String,
    pub theory: Arc<Theory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error (request {id:?}): {detail}")]
    Protocol { id: Option<u64>, detail: String },
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("session {0} is poisoned until restored")]
    Poisoned(SessionId),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("unknown snapshot {0:?}")]
    UnknownSnapshot(Snapshot),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("server error [{category}]: {detail}")]
    Server { category: String, detail: String },
}

pub trait ProverBackend {
    fn load_theory(&mut self, source: &str) -> Result<TheoryHandle, BackendError>;

    /// Opens a session at the initial state of `theorem`.
    fn start(&mut self, theory: &TheoryHandle, theorem: &str) -> Result<(SessionId, ProofState), BackendError>;

    /// Executes `step` on the session's current state. On success the
    /// session advances to the new state.
    fn apply(&mut self, session: &SessionId, step: &ProofStep, timeout: Duration) -> Result<StepResult, BackendError>;

    fn state(&mut self, session: &SessionId) -> Result<ProofState, BackendError>;

    fn clone_state(&mut self, session: &SessionId) -> Result<Snapshot, BackendError>;

    fn restore(&mut self, session: &SessionId, snapshot: &Snapshot) -> Result<ProofState, BackendError>;

    fn counterexample(&mut self, session: &SessionId, atom_limit: usize) -> Result<CexResult, BackendError>;

    fn hammer(&mut self, session: &SessionId, config: &HammerConfig) -> Result<HammerResult, BackendError>;

    fn close(&mut self, session: &SessionId) -> Result<(), BackendError>;
}

impl<B: ProverBackend + ?Sized> ProverBackend for Box<B> {
    fn load_theory(&mut self, source: &str) -> Result<TheoryHandle, BackendError> {
        (**self).load_theory(source)
    }
    fn start(&mut self, theory: &TheoryHandle, theorem: &str) -> Result<(SessionId, ProofState), BackendError> {
        (**self).start(theory, theorem)
    }
    fn apply(&mut self, session: &SessionId, step: &ProofStep, timeout: Duration) -> Result<StepResult, BackendError> {
        (**self).apply(session, step, timeout)
    }
    fn state(&mut self, session: &SessionId) -> Result<ProofState, BackendError> {
        (**self).state(session)
    }
    fn clone_state(&mut self, session: &SessionId) -> Result<Snapshot, BackendError> {
        (**self).clone_state(session)
    }
    fn restore(&mut self, session: &SessionId, snapshot: &Snapshot) -> Result<ProofState, BackendError> {
        (**self).restore(session, snapshot)
    }
    fn counterexample(&mut self, session: &SessionId, atom_limit: usize) -> Result<CexResult, BackendError> {
        (**self).counterexample(session, atom_limit)
    }
    fn hammer(&mut self, session: &SessionId, config: &HammerConfig) -> Result<HammerResult, BackendError> {
        (**self).hammer(session, config)
    }
    fn close(&mut self, session: &SessionId) -> Result<(), BackendError> {
        (**self).close(session)
    }
}

/// Replays `steps` from the start of `theorem` in a fresh session and
/// reports whether the proof closes every subgoal.
pub fn replay_proof(
    backend: &mut dyn ProverBackend,
    theory: &TheoryHandle,
    theorem: &str,
    steps: &[ProofStep],
    timeout: Duration,
) -> Result<bool, BackendError> {
    let (session, _) = backend.start(theory, theorem)?;
    let mut closed = false;
    for step in steps {
        match backend.apply(&session, step, timeout)? {
            StepResult::Success(next) => closed = next.is_complete(),
            StepResult::Failure { .. } => {
                closed = false;
                break;
            }
        }
    }
    backend.close(&session)?;
    Ok(closed)
}
