use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeneratorConfig, GeneratorError, StepGenerator};
use crate::state::{ProofState, Subgoal};
use crate::step::{sort_candidates, Candidate, Origin, ProofStep, Tactic};
use crate::theory::source_digest;

const BARE: [Tactic; 7] =
    [Tactic::Assumption, Tactic::Intro, Tactic::Split, Tactic::Left, Tactic::Right, Tactic::Simp, Tactic::Auto];

/// Seeded test double for a trained step model.
///
/// Pool: the bare tactics plus `apply`/`elim` over every context fact and
/// every hypothesis of the first subgoal. A fact-bearing step weighs
/// `1 + |atoms(fact) ∩ atoms(goal)|`, anything else weighs 1. Weights are
/// optionally scaled by a seeded factor in [0.5, 2.0] and normalized.
pub fn mock_generate(state: &ProofState, config: &GeneratorConfig) -> Vec<Candidate> {
    let Some(first) = state.first() else {
        return Vec::new();
    };
    let goal_atoms = first.goal.atoms();

    let mut pool: Vec<(ProofStep, f64)> = BARE.iter().map(|t| (ProofStep::bare(*t), 1.0)).collect();
    let hyps = first
        .hypotheses()
        .iter()
        .enumerate()
        .map(|(i, h)| (Subgoal::hypothesis_name(i), h))
        .filter(|(name, _)| !state.context.contains(name));
    let names = state.context.facts.iter().map(|(id, f)| (id.clone(), f)).chain(hyps);
    for (name, fact) in names {
        let overlap = fact.atoms().intersection(&goal_atoms).count();
        let weight = 1.0 + overlap as f64;
        for tactic in [Tactic::Apply, Tactic::Elim] {
            pool.push((ProofStep::with_fact(tactic, &name), weight));
        }
    }

    if config.perturb {
        let seed = config.seed ^ u64::from_str_radix(&source_digest(&state.key()), 16).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, w) in pool.iter_mut() {
            *w *= rng.gen_range(0.5..=2.0);
        }
    }

    let total: f64 = pool.iter().map(|(_, w)| w).sum();
    let mut out: Vec<Candidate> = pool
        .into_iter()
        .map(|(step, w)| Candidate::new(step, (w / total).ln().min(0.0), Origin::Generated).expect("normalized weight"))
        .collect();
    sort_candidates(&mut out);
    out.truncate(config.n_candidates);
    out
}

#[derive(Debug, Clone, Default)]
pub struct MockGenerator {
    pub config: GeneratorConfig,
}

impl MockGenerator {
    pub fn new(config: GeneratorConfig) -> Self {
        MockGenerator { config }
    }
}

impl StepGenerator for MockGenerator {
    fn generate(&self, state: &ProofState, n: usize) -> Result<Vec<Candidate>, GeneratorError> {
        let config = GeneratorConfig { n_candidates: n.min(self.config.n_candidates), ..self.config.clone() };
        Ok(mock_generate(state, &config))
    }
}
