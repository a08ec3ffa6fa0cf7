//! Hammer fallback over the most promising states of a failed search.

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ProverBackend};
use crate::prover::{HammerConfig, HammerResult};
use crate::revision::relevance_filter;
use crate::search::{reconstruct_proof, SearchTree};
use crate::state::{FactContext, ProofState};
use crate::step::ProofStep;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HammerFallbackConfig {
    pub enabled: bool,
    /// How many of the best-scoring states get a hammer call.
    pub m_states: usize,
    pub premise_limit: usize,
    pub per_state_timeout_ms: u64,
    /// Weight of the symbol-overlap ranking against the usage ranking.
    pub mesh_weight: f64,
    pub max_depth: usize,
}

impl Default for HammerFallbackConfig {
    fn default() -> Self {
        HammerFallbackConfig {
            enabled: true,
            m_states: 16,
            premise_limit: 2048,
            per_state_timeout_ms: 60_000,
            mesh_weight: 0.5,
            max_depth: 4,
        }
    }
}

impl HammerFallbackConfig {
    pub fn hammer_config(&self, premises: Vec<String>) -> HammerConfig {
        HammerConfig {
            max_depth: self.max_depth,
            premise_limit: self.premise_limit,
            budget_ms: self.per_state_timeout_ms,
            premises: Some(premises),
        }
    }
}

/// Blends the relevance ranking (reciprocal rank) with normalized usage
/// counts: `w * mepo + (1 - w) * usage / max_usage`. Facts scoring zero are
/// left out; ties go by fact id.
pub fn mesh_rank(state: &ProofState, context: &FactContext, k: usize, weight: f64) -> Vec<String> {
    let relevance = relevance_filter(state, context, context.len());
    let max_usage = context.ids().map(|id| context.usage(id)).max().unwrap_or(0);
    let mut scored: Vec<(f64, &str)> = context
        .ids()
        .map(|id| {
            let mepo = relevance.iter().position(|r| r == id).map_or(0.0, |i| 1.0 / (i + 1) as f64);
            let mash = if max_usage == 0 { 0.0 } else { f64::from(context.usage(id)) / f64::from(max_usage) };
            (weight * mepo + (1.0 - weight) * mash, id)
        })
        .filter(|(s, _)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackAttempt {
    pub node: usize,
    pub score: f64,
    pub premises: usize,
    pub result: HammerResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FallbackReport {
    pub attempts: Vec<FallbackAttempt>,
    /// Full proof from the root when some attempt succeeded.
    pub proof: Option<Vec<ProofStep>>,
}

/// Calls the hammer on up to `m_states` tree nodes in score order (root
/// included). The first success, which is on the best-scoring state, wins;
/// its proof is the tree path followed by the hammer's steps.
pub fn hammer_fallback(
    tree: &SearchTree,
    backend: &mut dyn ProverBackend,
    config: &HammerFallbackConfig,
) -> Result<FallbackReport, BackendError> {
    let mut report = FallbackReport::default();
    let Some(session) = tree.session.clone() else {
        return Ok(report);
    };
    for node in tree.ranked().into_iter().take(config.m_states) {
        let n = &tree.nodes[node];
        let state = backend.restore(&session, &n.snapshot)?;
        let k = config.premise_limit.min(state.context.len());
        let premises = mesh_rank(&state, &state.context, k, config.mesh_weight);
        let count = premises.len();
        let result = backend.hammer(&session, &config.hammer_config(premises))?;
        let found = match &result {
            HammerResult::Found { steps } => {
                let mut proof = reconstruct_proof(tree, node);
                proof.extend(steps.iter().cloned());
                Some(proof)
            }
            _ => None,
        };
        report.attempts.push(FallbackAttempt { node, score: n.score, premises: count, result });
        if found.is_some() {
            report.proof = found;
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::state::Subgoal;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn ctx_with_usage(facts: &[(&str, &str, u32)]) -> FactContext {
        let mut ctx = FactContext::new(facts.iter().map(|(k, v, _)| (k.to_string(), parse_formula(v).unwrap())));
        ctx.usage_counts = facts.iter().map(|(k, _, u)| (k.to_string(), *u)).collect::<BTreeMap<_, _>>();
        ctx
    }

    fn state(goal: &str, ctx: FactContext) -> ProofState {
        ProofState::new(vec![Subgoal::goal(parse_formula(goal).unwrap())], Arc::new(ctx))
    }

    #[test]
    fn equal_blend_ties_break_by_id() {
        let ctx = ctx_with_usage(&[("f1", "p -> q", 0), ("f2", "r", 5)]);
        let s = state("q", ctx.clone());
        assert_eq!(mesh_rank(&s, &ctx, 2, 0.5), ["f1", "f2"]);
    }

    #[test]
    fn full_weight_matches_relevance_filter() {
        let ctx = ctx_with_usage(&[("a", "p -> q", 9), ("b", "q -> r", 0), ("c", "s", 3), ("d", "r & p", 1)]);
        let s = state("r", ctx.clone());
        for k in 0..5 {
            assert_eq!(mesh_rank(&s, &ctx, k, 1.0), relevance_filter(&s, &ctx, k));
        }
    }

    #[test]
    fn zero_weight_ranks_by_usage() {
        let ctx = ctx_with_usage(&[("a", "p", 1), ("b", "q", 7), ("c", "s", 0)]);
        let s = state("p", ctx.clone());
        assert_eq!(mesh_rank(&s, &ctx, 3, 0.0), ["b", "a"]);
    }
}
