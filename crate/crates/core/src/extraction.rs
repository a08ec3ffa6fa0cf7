//! Replays recorded proofs and collects (state, step) training pairs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ProverBackend, TheoryHandle};
use crate::result::StepResult;
use crate::state::parse_state;
use crate::step::parse_step;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatePair {
    pub theory: String,
    pub theorem: String,
    /// 0-based position of `step` in the proof.
    pub index: usize,
    /// Rendered proof state before the step.
    pub state: String,
    pub step: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayFailure {
    pub theorem: String,
    pub step_index: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub pairs: Vec<StatePair>,
    pub failures: Vec<ReplayFailure>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Replays every recorded proof in the theory. A theorem whose replay fails
/// contributes no pairs and one failure entry; extraction moves on.
pub fn extract_pairs(
    backend: &mut dyn ProverBackend,
    theory: &TheoryHandle,
    step_timeout: Duration,
) -> Result<Extraction, BackendError> {
    let mut out = Extraction::default();
    for entry in theory.theory.provable() {
        let Some(proof) = &entry.proof else { continue };
        let (session, mut state) = backend.start(theory, &entry.id)?;
        let mut pairs = Vec::with_capacity(proof.len());
        let mut failure = None;
        for (i, step) in proof.iter().enumerate() {
            pairs.push(StatePair {
                theory: theory.theory.name.clone(),
                theorem: entry.id.clone(),
                index: i,
                state: state.render(),
                step: step.text(),
            });
            match backend.apply(&session, step, step_timeout)? {
                StepResult::Success(next) => state = next,
                StepResult::Failure { category, detail } => {
                    failure = Some((i, format!("{category}: {detail}")));
                    break;
                }
            }
        }
        if failure.is_none() && !state.is_complete() {
            failure = Some((proof.len(), format!("{} subgoal(s) left open", state.subgoals.len())));
        }
        backend.close(&session)?;
        match failure {
            None => out.pairs.extend(pairs),
            Some((step_index, detail)) => {
                out.failures.push(ReplayFailure { theorem: entry.id.clone(), step_index, detail })
            }
        }
    }
    Ok(out)
}

/// Fidelity of one pair: replaying the first `index` ground-truth steps
/// reproduces `state` exactly, the text parses back to the same state, and
/// `step` then succeeds.
pub fn check_pair(
    backend: &mut dyn ProverBackend,
    theory: &TheoryHandle,
    pair: &StatePair,
    step_timeout: Duration,
) -> Result<bool, BackendError> {
    let Some(proof) = theory.theory.entry(&pair.theorem).and_then(|e| e.proof.as_ref()) else {
        return Ok(false);
    };
    let (Some(step), Ok(parsed_step)) = (proof.get(pair.index), parse_step(&pair.step)) else {
        return Ok(false);
    };
    if *step != parsed_step {
        return Ok(false);
    }
    let (session, mut state) = backend.start(theory, &pair.theorem)?;
    let mut ok = true;
    for prefix_step in &proof[..pair.index] {
        match backend.apply(&session, prefix_step, step_timeout)? {
            StepResult::Success(next) => state = next,
            StepResult::Failure { .. } => {
                ok = false;
                break;
            }
        }
    }
    ok = ok
        && state.render() == pair.state
        && parse_state(&pair.state, state.context.clone()).is_ok_and(|parsed| parsed.subgoals == state.subgoals)
        && backend.apply(&session, &parsed_step, step_timeout)?.is_success();
    backend.close(&session)?;
    Ok(ok)
}

/// Writes one JSON object per line; returns the number of pairs written.
pub fn write_dataset(pairs: &[StatePair], path: &Path) -> Result<usize, DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    for pair in pairs {
        serde_json::to_writer(&mut w, pair).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(pairs.len())
}

pub fn read_dataset(path: &Path) -> Result<Vec<StatePair>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair =
            serde_json::from_str(&line).map_err(|e| DatasetError::Malformed { line: i + 1, message: e.to_string() })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prover::ToyProver;

    const SOURCE: &str = "theory T\n\
        axiom f1: p\n\
        axiom f2: p -> q\n\
        theorem good: q\n\
        proof\n  apply [f2]\n  apply [f1]\nqed\n\
        theorem broken: q\n\
        proof\n  apply [nope]\n  apply [f1]\nqed\n\
        lemma short: q\n\
        proof\n  apply [f2]\nqed\nend\n";

    #[test]
    fn pairs_and_failures() {
        let mut prover = ToyProver::new();
        let handle = prover.load_theory(SOURCE).unwrap();
        let out = extract_pairs(&mut prover, &handle, Duration::from_secs(1)).unwrap();
        assert_eq!(out.pairs.len(), 2);
        assert_eq!(out.pairs[0].step, "apply [f2]");
        assert!(out.pairs[0].state.contains("⊢ q"));
        assert!(out.pairs[1].state.contains("⊢ p"));
        assert_eq!(out.failures.len(), 2);
        assert_eq!((out.failures[0].theorem.as_str(), out.failures[0].step_index), ("broken", 0));
        assert!(out.failures[0].detail.starts_with("undefined_fact"));
        assert_eq!((out.failures[1].theorem.as_str(), out.failures[1].step_index), ("short", 1));
        for pair in &out.pairs {
            assert!(check_pair(&mut prover, &handle, pair, Duration::from_secs(1)).unwrap());
        }
        let mut tampered = out.pairs[1].clone();
        tampered.state = out.pairs[0].state.clone();
        assert!(!check_pair(&mut prover, &handle, &tampered, Duration::from_secs(1)).unwrap());
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        let pairs = vec![StatePair {
            theory: "T".into(),
            theorem: "t".into(),
            index: 0,
            state: "goal (1 subgoal):\n 1. ⊢ q".into(),
            step: "apply [f2]".into(),
        }];
        assert_eq!(write_dataset(&pairs, &path).unwrap(), 1);
        assert_eq!(read_dataset(&path).unwrap(), pairs);
        std::fs::write(&path, "{\"theory\": 3}\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(DatasetError::Malformed { line: 1, .. })));
    }
}
