//! One theorem end to end: best-first search, then the hammer fallback.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{ProverBackend, TheoryHandle};
use crate::generator::StepGenerator;
use crate::hammer::{hammer_fallback, FallbackReport, HammerFallbackConfig};
use crate::search::{best_first_search, SearchConfig, SearchError, SearchOutcome, SearchStats};
use crate::step::Origin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Proved,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoundBy {
    Search,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierEntry {
    pub node: usize,
    pub score: f64,
    pub length: usize,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theory: String,
    pub theorem: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proof: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub found_by: Option<FoundBy>,
    /// Where each search step came from (generator or a repair).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub origins: Vec<Origin>,
    pub search: SearchStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<FallbackReport>,
    /// Best unexplored nodes when the search failed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frontier: Vec<FrontierEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_length: Option<usize>,
    pub wall_time_ms: u64,
}

impl TheoremReport {
    pub fn is_proved(&self) -> bool {
        self.outcome == Outcome::Proved
    }
}

const FRONTIER_SHOWN: usize = 10;

pub fn prove_theorem(
    backend: &mut dyn ProverBackend,
    theory: &TheoryHandle,
    theorem: &str,
    generator: &dyn StepGenerator,
    search: &SearchConfig,
    fallback: &HammerFallbackConfig,
) -> Result<TheoremReport, SearchError> {
    let started = Instant::now();
    let outcome = best_first_search(backend, theory, theorem, generator, search)?;
    let mut report = TheoremReport {
        theory: theory.theory.name.clone(),
        theorem: theorem.to_string(),
        outcome: Outcome::Failed,
        proof: None,
        found_by: None,
        origins: Vec::new(),
        search: *outcome.stats(),
        fallback: None,
        frontier: Vec::new(),
        ground_truth_length: theory.theory.entry(theorem).and_then(|e| e.proof.as_ref()).map(Vec::len),
        wall_time_ms: 0,
    };
    match outcome {
        SearchOutcome::Proved { steps, .. } => {
            report.outcome = Outcome::Proved;
            report.found_by = Some(FoundBy::Search);
            report.origins = steps.iter().map(|c| c.origin).collect();
            report.proof = Some(steps.iter().map(|c| c.step.text()).collect());
        }
        SearchOutcome::Failed { tree, .. } => {
            report.frontier = tree
                .ranked()
                .into_iter()
                .filter(|&i| !tree.nodes[i].explored)
                .take(FRONTIER_SHOWN)
                .map(|i| FrontierEntry {
                    node: i,
                    score: tree.nodes[i].score,
                    length: tree.nodes[i].length,
                    key: tree.nodes[i].key.clone(),
                })
                .collect();
            if fallback.enabled {
                let fb = hammer_fallback(&tree, backend, fallback)?;
                if let Some(proof) = &fb.proof {
                    report.outcome = Outcome::Proved;
                    report.found_by = Some(FoundBy::Fallback);
                    report.proof = Some(proof.iter().map(|s| s.text()).collect());
                }
                report.fallback = Some(fb);
            }
            if let Some(session) = &tree.session {
                backend.close(session)?;
            }
        }
    }
    report.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::replay_proof;
    use crate::generator::{GeneratorConfig, MockGenerator};
    use crate::prover::ToyProver;
    use crate::step::parse_step;
    use std::time::Duration;

    #[test]
    fn fallback_finishes_what_search_starts() {
        // The shortest proof has 5 steps, one more than the hammer's depth.
        // One search iteration expands only the root; the hammer then
        // finishes from the `elim [d]` child in 4.
        let src = "theory f\naxiom d: a | b\naxiom g1: a -> c\naxiom g3: b -> c\ntheorem t: c\nend\n";
        let mut prover = ToyProver::new();
        let handle = prover.load_theory(src).unwrap();
        let gen = MockGenerator::new(GeneratorConfig { seed: 3, ..Default::default() });
        let search = SearchConfig { max_iterations: 1, top_k: 1, ..Default::default() };

        let root_only = crate::prover::toy_hammer(
            &crate::prover::init_goal(&handle.theory, "t").unwrap(),
            &crate::prover::HammerConfig::default(),
        );
        assert_eq!(root_only, crate::prover::HammerResult::NotFound);

        let report = prove_theorem(&mut prover, &handle, "t", &gen, &search, &HammerFallbackConfig::default()).unwrap();
        assert!(report.is_proved());
        assert_eq!(report.found_by, Some(FoundBy::Fallback));
        let steps: Vec<_> = report.proof.unwrap().iter().map(|s| parse_step(s).unwrap()).collect();
        assert!(replay_proof(&mut prover, &handle, "t", &steps, Duration::from_secs(1)).unwrap());
    }

    #[test]
    fn failure_reports_frontier() {
        let src = "theory f\naxiom d: a -> b\ntheorem t: b\nend\n";
        let mut prover = ToyProver::new();
        let handle = prover.load_theory(src).unwrap();
        let gen = MockGenerator::default();
        let search = SearchConfig { filtering_enabled: false, max_iterations: 1, top_k: 1, ..Default::default() };
        let fallback = HammerFallbackConfig { enabled: false, ..Default::default() };
        let report = prove_theorem(&mut prover, &handle, "t", &gen, &search, &fallback).unwrap();
        assert_eq!(report.outcome, Outcome::Failed);
        assert!(!report.frontier.is_empty());
        assert!(report.fallback.is_none());
    }
}
