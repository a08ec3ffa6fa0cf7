//! Pruning of search children: duplicate states and states with counterexamples.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;
use crate::prover::{check_counterexample, CexResult, DEFAULT_ATOM_LIMIT};
use crate::state::ProofState;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub duplicates_rejected: usize,
    pub counterexamples_rejected: usize,
    pub unknown_oracle: usize,
}

impl FilterStats {
    pub fn add(&mut self, other: &FilterStats) {
        self.duplicates_rejected += other.duplicates_rejected;
        self.counterexamples_rejected += other.counterexamples_rejected;
        self.unknown_oracle += other.unknown_oracle;
    }
}

/// Canonical keys of every state reached in one search.
#[derive(Debug, Clone, Default)]
pub struct SeenSet {
    keys: HashSet<String>,
}

impl SeenSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, state: &ProofState) -> bool {
        self.keys.contains(&state.key())
    }
}

/// True when an equal state was seen before. A fresh state is recorded.
pub fn is_duplicate(state: &ProofState, seen: &mut SeenSet) -> bool {
    !seen.keys.insert(state.key())
}

/// Semantic equivalence: each state's subgoals follow from the other's,
/// checked by truth table over all their atoms together with the context.
/// States over more than `DEFAULT_ATOM_LIMIT` atoms are never equivalent.
pub fn states_equivalent(a: &ProofState, b: &ProofState) -> bool {
    if a.key() == b.key() {
        return true;
    }
    let mut atoms = std::collections::BTreeSet::new();
    for s in [a, b] {
        for sg in &s.subgoals {
            atoms.extend(sg.atoms().into_iter().map(str::to_string));
        }
        for f in s.context.facts.values() {
            atoms.extend(f.atoms().into_iter().map(str::to_string));
        }
    }
    if atoms.len() > DEFAULT_ATOM_LIMIT {
        return false;
    }
    let atoms: Vec<String> = atoms.into_iter().collect();
    // A state "holds" under an assignment when every subgoal's hypotheses
    // imply its goal. Context facts restrict the assignments considered.
    let holds = |s: &ProofState, v: &dyn Fn(&str) -> bool| {
        s.subgoals.iter().all(|sg| !sg.hypotheses().iter().all(|h| h.eval(&v)) || sg.goal.eval(&v))
    };
    for bits in 0u64..(1u64 << atoms.len()) {
        let v = |name: &str| {
            let i = atoms.iter().position(|a| a == name).expect("atom collected");
            bits >> (atoms.len() - 1 - i) & 1 == 1
        };
        let ctx_ok = a.context.facts.values().chain(b.context.facts.values()).all(|f| f.eval(&v));
        if ctx_ok && holds(a, &v) != holds(b, &v) {
            return false;
        }
    }
    true
}

/// Source of counterexample verdicts for a state.
pub trait CounterexampleOracle {
    fn check(&mut self, state: &ProofState) -> Result<CexResult, BackendError>;
}

/// In-process truth-table oracle.
#[derive(Debug, Clone, Copy)]
pub struct TruthTableOracle {
    pub atom_limit: usize,
}

impl Default for TruthTableOracle {
    fn default() -> Self {
        TruthTableOracle { atom_limit: DEFAULT_ATOM_LIMIT }
    }
}

impl CounterexampleOracle for TruthTableOracle {
    fn check(&mut self, state: &ProofState) -> Result<CexResult, BackendError> {
        Ok(check_counterexample(state, self.atom_limit))
    }
}

/// Asks each oracle in turn; the first non-`Unknown` verdict wins.
#[derive(Default)]
pub struct OracleChain {
    pub oracles: Vec<Box<dyn CounterexampleOracle>>,
}

impl CounterexampleOracle for OracleChain {
    fn check(&mut self, state: &ProofState) -> Result<CexResult, BackendError> {
        let mut last = CexResult::Unknown { reason: "no oracle configured".into() };
        for oracle in &mut self.oracles {
            last = oracle.check(state)?;
            if !matches!(last, CexResult::Unknown { .. }) {
                return Ok(last);
            }
        }
        Ok(last)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub dedup: bool,
    pub counterexamples: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { dedup: true, counterexamples: true }
    }
}

/// Drops duplicates (cheap, checked first) and then states the oracle can
/// falsify. `Unknown` verdicts keep the state. Survivors keep input order.
pub fn filter_states<T>(
    candidates: Vec<(ProofState, T)>,
    seen: &mut SeenSet,
    oracle: &mut dyn FnMut(&ProofState, &T) -> Result<CexResult, BackendError>,
    config: &FilterConfig,
) -> Result<(Vec<(ProofState, T)>, FilterStats), BackendError> {
    let mut stats = FilterStats::default();
    let mut kept = Vec::with_capacity(candidates.len());
    for (state, payload) in candidates {
        if config.dedup && is_duplicate(&state, seen) {
            stats.duplicates_rejected += 1;
            continue;
        }
        if config.counterexamples {
            match oracle(&state, &payload)? {
                CexResult::Counterexample { .. } => {
                    stats.counterexamples_rejected += 1;
                    continue;
                }
                CexResult::Unknown { .. } => stats.unknown_oracle += 1,
                CexResult::NoCounterexample => {}
            }
        }
        kept.push((state, payload));
    }
    Ok((kept, stats))
}
