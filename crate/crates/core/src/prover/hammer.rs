//! Bounded proof search standing in for an external hammer.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::prover::exec::apply_step;
use crate::result::StepResult;
use crate::revision::relevance_filter;
use crate::state::{ProofState, Subgoal};
use crate::step::{ProofStep, Tactic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammerConfig {
    pub max_depth: usize,
    pub premise_limit: usize,
    pub budget_ms: u64,
    /// Ranked premise pool; when absent the relevance filter picks one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premises: Option<Vec<String>>,
}

impl Default for HammerConfig {
    fn default() -> Self {
        HammerConfig { max_depth: 4, premise_limit: 2048, budget_ms: 60_000, premises: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum HammerResult {
    Found { steps: Vec<ProofStep> },
    NotFound,
    Timeout,
}

/// Tactics tried by the hammer, in order. Fact-taking ones expand over the pool.
pub const HAMMER_TACTICS: [Tactic; 7] =
    [Tactic::Assumption, Tactic::Intro, Tactic::Split, Tactic::Left, Tactic::Right, Tactic::Elim, Tactic::Apply];

/// Candidate steps at `state`: bare tactics first, then `elim` and `apply`
/// over the pool followed by the first subgoal's hypotheses.
pub fn hammer_moves(state: &ProofState, pool: &[String]) -> Vec<ProofStep> {
    let hyps = state.first().map_or(0, |sg| sg.hypotheses().len());
    let names: Vec<String> = pool.iter().cloned().chain((0..hyps).map(Subgoal::hypothesis_name)).collect();
    let mut moves = Vec::new();
    for tactic in HAMMER_TACTICS {
        if tactic.requires_facts() {
            moves.extend(names.iter().map(|n| ProofStep::with_fact(tactic, n)));
        } else {
            moves.push(ProofStep::bare(tactic));
        }
    }
    moves
}

pub fn hammer_pool(state: &ProofState, config: &HammerConfig) -> Vec<String> {
    let limit = config.premise_limit.min(state.context.len());
    match &config.premises {
        Some(ids) => ids.iter().filter(|id| state.context.contains(id)).take(limit).cloned().collect(),
        None => relevance_filter(state, &state.context, limit),
    }
}

struct Expired;

struct Deepening<'a> {
    pool: &'a [String],
    deadline: Option<Instant>,
    /// Rendered state -> largest remaining depth known to fail.
    failed: HashMap<String, usize>,
}

impl Deepening<'_> {
    fn search(&mut self, state: &ProofState, remaining: usize) -> Result<Option<Vec<ProofStep>>, Expired> {
        if state.is_complete() {
            return Ok(Some(Vec::new()));
        }
        if remaining == 0 {
            return Ok(None);
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Expired);
        }
        let key = state.render();
        if self.failed.get(&key).is_some_and(|&d| d >= remaining) {
            return Ok(None);
        }
        for step in hammer_moves(state, self.pool) {
            if let StepResult::Success(next) = apply_step(state, &step, Duration::MAX) {
                if let Some(mut rest) = self.search(&next, remaining - 1)? {
                    rest.insert(0, step);
                    return Ok(Some(rest));
                }
            }
        }
        let entry = self.failed.entry(key).or_insert(0);
        *entry = (*entry).max(remaining);
        Ok(None)
    }
}

/// Iterative deepening up to `config.max_depth` steps. `Found` steps close
/// every subgoal of `state` when replayed.
pub fn toy_hammer(state: &ProofState, config: &HammerConfig) -> HammerResult {
    let pool = hammer_pool(state, config);
    let mut search = Deepening {
        pool: &pool,
        deadline: Instant::now().checked_add(Duration::from_millis(config.budget_ms)),
        failed: HashMap::new(),
    };
    for depth in 0..=config.max_depth {
        match search.search(state, depth) {
            Ok(Some(steps)) => return HammerResult::Found { steps },
            Ok(None) => {}
            Err(Expired) => return HammerResult::Timeout,
        }
    }
    HammerResult::NotFound
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::state::FactContext;
    use crate::step::parse_step;
    use std::sync::Arc;

    fn state(goal: &str, facts: &[(&str, &str)]) -> ProofState {
        let ctx = FactContext::new(facts.iter().map(|(k, v)| (k.to_string(), parse_formula(v).unwrap())));
        ProofState::new(vec![Subgoal::goal(parse_formula(goal).unwrap())], Arc::new(ctx))
    }

    fn steps(texts: &[&str]) -> Vec<ProofStep> {
        texts.iter().map(|t| parse_step(t).unwrap()).collect()
    }

    #[test]
    fn finds_two_step_chain() {
        // After `apply [f2]` the goal `p` is itself a context fact, and
        // `assumption` is tried before `apply`.
        let s = state("q", &[("f1", "p"), ("f2", "p -> q")]);
        assert_eq!(
            toy_hammer(&s, &HammerConfig::default()),
            HammerResult::Found { steps: steps(&["apply [f2]", "assumption"]) }
        );
    }

    #[test]
    fn false_without_facts_is_not_found() {
        assert_eq!(toy_hammer(&state("false", &[]), &HammerConfig::default()), HammerResult::NotFound);
    }

    #[test]
    fn assumption_comes_first() {
        let s = state("p", &[("f1", "p")]);
        assert_eq!(toy_hammer(&s, &HammerConfig::default()), HammerResult::Found { steps: steps(&["assumption"]) });
    }

    #[test]
    fn depth_bound_is_respected() {
        let facts = [("a0", "x0"), ("a1", "x0 -> x1"), ("a2", "x1 -> x2"), ("a3", "x2 -> x3"), ("a4", "x3 -> x4")];
        let s = state("x4", &facts);
        assert_eq!(toy_hammer(&s, &HammerConfig::default()), HammerResult::NotFound);
        let deeper = HammerConfig { max_depth: 5, ..HammerConfig::default() };
        assert!(matches!(toy_hammer(&s, &deeper), HammerResult::Found { .. }));
    }

    #[test]
    fn explicit_pool_restricts_premises() {
        let s = state("q", &[("f0", "r"), ("f1", "r -> p"), ("f2", "p -> q")]);
        assert!(matches!(toy_hammer(&s, &HammerConfig::default()), HammerResult::Found { .. }));
        let cfg = HammerConfig { premises: Some(vec!["f2".into()]), ..HammerConfig::default() };
        assert_eq!(toy_hammer(&s, &cfg), HammerResult::NotFound);
        let cfg = HammerConfig { premise_limit: 1, ..HammerConfig::default() };
        assert_eq!(toy_hammer(&s, &cfg), HammerResult::NotFound);
    }

    #[test]
    fn zero_budget_times_out() {
        let s = state("q", &[("f1", "p"), ("f2", "p -> q")]);
        let cfg = HammerConfig { budget_ms: 0, ..HammerConfig::default() };
        assert_eq!(toy_hammer(&s, &cfg), HammerResult::Timeout);
    }

    #[test]
    fn uses_elim_on_disjunctions() {
        let s = state("r", &[("d", "r | q"), ("g", "q -> r")]);
        match toy_hammer(&s, &HammerConfig::default()) {
            HammerResult::Found { steps: found } => {
                assert_eq!(found[0], parse_step("elim [d]").unwrap())
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
