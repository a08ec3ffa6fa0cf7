use std::collections::HashMap;

use super::{GeneratorError, StepGenerator};
use crate::extraction::StatePair;
use crate::state::ProofState;
use crate::step::{dedup_keep_max, parse_step, sort_candidates, Candidate, Origin, ProofStep, Tactic};

const FALLBACK: [Tactic; 7] =
    [Tactic::Assumption, Tactic::Intro, Tactic::Split, Tactic::Left, Tactic::Right, Tactic::Simp, Tactic::Auto];

/// A generator that has memorized (state, step) pairs.
///
/// For a state seen in the dataset, the recorded steps share `memory_mass`
/// of the probability in proportion to how often they were recorded; the
/// fact-free tactics split the rest. Unseen states get only the fact-free
/// tactics, uniformly.
#[derive(Debug, Clone)]
pub struct DatasetGenerator {
    memory: HashMap<String, Vec<(ProofStep, usize)>>,
    pub memory_mass: f64,
}

impl DatasetGenerator {
    pub fn new(pairs: &[StatePair]) -> Self {
        let mut memory: HashMap<String, Vec<(ProofStep, usize)>> = HashMap::new();
        for pair in pairs {
            let Ok(step) = parse_step(&pair.step) else {
                continue;
            };
            let steps = memory.entry(pair.state.clone()).or_default();
            match steps.iter_mut().find(|(s, _)| *s == step) {
                Some((_, count)) => *count += 1,
                None => steps.push((step, 1)),
            }
        }
        DatasetGenerator { memory, memory_mass: 0.9 }
    }

    pub fn states(&self) -> usize {
        self.memory.len()
    }
}

impl StepGenerator for DatasetGenerator {
    fn generate(&self, state: &ProofState, n: usize) -> Result<Vec<Candidate>, GeneratorError> {
        let mut out = Vec::new();
        let fallback_mass = match self.memory.get(&state.render()) {
            Some(steps) => {
                let total: usize = steps.iter().map(|(_, c)| c).sum();
                for (step, count) in steps {
                    let p = self.memory_mass * *count as f64 / total as f64;
                    out.push(Candidate::new(step.clone(), p.ln().min(0.0), Origin::Generated).expect("probability"));
                }
                1.0 - self.memory_mass
            }
            None => 1.0,
        };
        let share = (fallback_mass / FALLBACK.len() as f64).ln().min(0.0);
        for tactic in FALLBACK {
            out.push(Candidate::new(ProofStep::bare(tactic), share, Origin::Generated).expect("probability"));
        }
        let mut out = dedup_keep_max(out);
        sort_candidates(&mut out);
        out.truncate(n);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::state::{FactContext, Subgoal};
    use std::sync::Arc;

    fn pair(state: &ProofState, step: &str) -> StatePair {
        StatePair { theory: "T".into(), theorem: "t".into(), index: 0, state: state.render(), step: step.into() }
    }

    #[test]
    fn memorized_steps_rank_first() {
        let ctx = Arc::new(FactContext::new([("f".to_string(), parse_formula("p -> q").unwrap())]));
        let s = ProofState::new(vec![Subgoal::goal(parse_formula("q").unwrap())], ctx.clone());
        let g = DatasetGenerator::new(&[pair(&s, "apply [f]"), pair(&s, "apply [f]"), pair(&s, "auto")]);
        let out = g.generate(&s, 10).unwrap();
        assert_eq!(out[0].step.text(), "apply [f]");
        assert!((out[0].log_prob() - (0.6f64).ln()).abs() < 1e-12);
        assert_eq!(out[1].step.text(), "auto");
        assert_eq!(out.len(), 8);

        let unseen = ProofState::new(vec![Subgoal::goal(parse_formula("r").unwrap())], ctx);
        let out = g.generate(&unseen, 10).unwrap();
        assert_eq!(out.len(), 7);
        assert!(out.iter().all(|c| c.step.facts.is_empty()));
    }
}
