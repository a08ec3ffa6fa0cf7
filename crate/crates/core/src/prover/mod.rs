//! The miniature interactive prover: tactic execution, counterexample
//! checking, a bounded hammer, and clone/restore sessions.

mod cex;
mod exec;
mod hammer;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

pub use cex::{check_counterexample, verify_counterexample, CexResult, DEFAULT_ATOM_LIMIT};
pub use exec::{apply_step, init_goal, match_conclusion, simplify, AUTO_DEPTH};
pub use hammer::{hammer_moves, hammer_pool, toy_hammer, HammerConfig, HammerResult, HAMMER_TACTICS};

use crate::backend::{BackendError, ProverBackend, SessionId, Snapshot, TheoryHandle};
use crate::result::StepResult;
use crate::state::ProofState;
use crate::step::ProofStep;
use crate::theory::{load_theory, source_digest, Theory};

#[derive(Debug, Clone)]
pub struct Session {
    pub current: ProofState,
    pub history: Vec<(ProofStep, ProofState)>,
}

/// In-process prover. Loaded theories are cached by source digest.
#[derive(Debug, Default)]
pub struct ToyProver {
    theories: HashMap<String, Arc<Theory>>,
    sessions: HashMap<String, Session>,
    snapshots: HashMap<String, ProofState>,
    next_session: u64,
    next_snapshot: u64,
    theory_loads: usize,
}

impl ToyProver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an already-parsed theory.
    pub fn register(&mut self, theory: Arc<Theory>) -> TheoryHandle {
        let digest = source_digest(&theory.to_source());
        self.theories.entry(digest.clone()).or_insert_with(|| theory.clone());
        TheoryHandle { digest, theory }
    }

    pub fn theory(&self, digest: &str) -> Option<Arc<Theory>> {
        self.theories.get(digest).cloned()
    }

    /// How many times a theory source was actually parsed (cache misses).
    pub fn theory_loads(&self) -> usize {
        self.theory_loads
    }

    pub fn session(&self, id: &SessionId) -> Option<&Session> {
        self.sessions.get(&id.0)
    }

    fn session_mut(&mut self, id: &SessionId) -> Result<&mut Session, BackendError> {
        self.sessions.get_mut(&id.0).ok_or_else(|| BackendError::UnknownSession(id.clone()))
    }

    pub fn open(&mut self, state: ProofState) -> SessionId {
        self.next_session += 1;
        let id = format!("s{}", self.next_session);
        self.sessions.insert(id.clone(), Session { current: state, history: Vec::new() });
        SessionId(id)
    }
}

impl ProverBackend for ToyProver {
    fn load_theory(&mut self, source: &str) -> Result<TheoryHandle, BackendError> {
        let digest = source_digest(source);
        if let Some(theory) = self.theories.get(&digest) {
            return Ok(TheoryHandle { digest, theory: theory.clone() });
        }
        let theory = Arc::new(load_theory(source)?);
        self.theory_loads += 1;
        self.theories.insert(digest.clone(), theory.clone());
        Ok(TheoryHandle { digest, theory })
    }

    fn start(&mut self, theory: &TheoryHandle, theorem: &str) -> Result<(SessionId, ProofState), BackendError> {
        let state = init_goal(&theory.theory, theorem)?;
        Ok((self.open(state.clone()), state))
    }

    fn apply(&mut self, session: &SessionId, step: &ProofStep, timeout: Duration) -> Result<StepResult, BackendError> {
        let s = self.session_mut(session)?;
        let result = apply_step(&s.current, step, timeout);
        if let StepResult::Success(next) = &result {
            let prev = std::mem::replace(&mut s.current, next.clone());
            s.history.push((step.clone(), prev));
        }
        Ok(result)
    }

    fn state(&mut self, session: &SessionId) -> Result<ProofState, BackendError> {
        Ok(self.session_mut(session)?.current.clone())
    }

    fn clone_state(&mut self, session: &SessionId) -> Result<Snapshot, BackendError> {
        let state = self.session_mut(session)?.current.clone();
        self.next_snapshot += 1;
        let token = format!("{}#{}", session.0, self.next_snapshot);
        self.snapshots.insert(token.clone(), state);
        Ok(Snapshot(token))
    }

    fn restore(&mut self, session: &SessionId, snapshot: &Snapshot) -> Result<ProofState, BackendError> {
        let state =
            self.snapshots.get(&snapshot.0).cloned().ok_or_else(|| BackendError::UnknownSnapshot(snapshot.clone()))?;
        let s = self.session_mut(session)?;
        s.current = state.clone();
        s.history.clear();
        Ok(state)
    }

    fn counterexample(&mut self, session: &SessionId, atom_limit: usize) -> Result<CexResult, BackendError> {
        Ok(check_counterexample(&self.session_mut(session)?.current, atom_limit))
    }

    fn hammer(&mut self, session: &SessionId, config: &HammerConfig) -> Result<HammerResult, BackendError> {
        Ok(toy_hammer(&self.session_mut(session)?.current, config))
    }

    fn close(&mut self, session: &SessionId) -> Result<(), BackendError> {
        self.sessions.remove(&session.0).ok_or_else(|| BackendError::UnknownSession(session.clone()))?;
        let prefix = format!("{}#", session.0);
        self.snapshots.retain(|token, _| !token.starts_with(&prefix));
        Ok(())
    }
}
