//! Repair of rejected steps: tactic recombination and nearest-name premise
//! substitution, plus the symbol-overlap relevance filter that builds the
//! premise pool.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::ErrorCategory;
use crate::state::{FactContext, ProofState};
use crate::step::{dedup_keep_max, sort_candidates, Candidate, Origin, ProofStep, Tactic};
use crate::theory::Theory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionConfig {
    pub tactic_set: Vec<Tactic>,
    pub premise_pool_size: usize,
    pub top_matches: usize,
    pub max_edit_distance: usize,
    /// Upper bound on revised candidates returned per expansion.
    pub budget: usize,
}

impl Default for RevisionConfig {
    fn default() -> Self {
        RevisionConfig {
            tactic_set: Tactic::ALL.to_vec(),
            premise_pool_size: 128,
            top_matches: 3,
            max_edit_distance: 3,
            budget: 256,
        }
    }
}

/// Number of tactics kept when ranking by corpus frequency.
pub const TACTIC_SET_SIZE: usize = 12;

/// Tactics ranked by how often they occur in ground-truth proofs, most
/// frequent first; ties keep the built-in tactic order. At most
/// [`TACTIC_SET_SIZE`] are returned.
pub fn tactic_set_from_corpus<'a>(theories: impl IntoIterator<Item = &'a Theory>) -> Vec<Tactic> {
    let mut counts = [0usize; Tactic::ALL.len()];
    for theory in theories {
        for step in theory.entries.iter().filter_map(|e| e.proof.as_ref()).flatten() {
            counts[Tactic::ALL.iter().position(|t| *t == step.tactic).unwrap()] += 1;
        }
    }
    let mut ranked: Vec<(usize, Tactic)> = Tactic::ALL.iter().enumerate().map(|(i, t)| (counts[i], *t)).collect();
    ranked.sort_by_key(|r| std::cmp::Reverse(r.0));
    ranked.into_iter().take(TACTIC_SET_SIZE).map(|(_, t)| t).collect()
}

#[derive(Debug, Clone)]
pub struct FailedAttempt {
    pub state: ProofState,
    pub step: ProofStep,
    pub log_prob: f64,
    pub category: ErrorCategory,
}

/// Iterative symbol-overlap selection (MePo-style). Starts from the atoms of
/// all subgoals; each round picks the unselected fact with the highest
/// `|atoms(f) ∩ R| / |atoms(f)|` (ties by id) and adds its atoms to `R`.
/// Stops after `k` facts or when every remaining fact scores zero.
pub fn relevance_filter(goal_state: &ProofState, context: &FactContext, k: usize) -> Vec<String> {
    let mut relevant: BTreeSet<&str> = BTreeSet::new();
    for sg in &goal_state.subgoals {
        relevant.extend(sg.atoms());
    }
    let mut remaining: Vec<(&str, BTreeSet<&str>)> =
        context.facts.iter().map(|(id, f)| (id.as_str(), f.atoms())).filter(|(_, atoms)| !atoms.is_empty()).collect();

    let mut selected = Vec::new();
    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, atoms)) in remaining.iter().enumerate() {
            let overlap = atoms.iter().filter(|a| relevant.contains(*a)).count();
            let score = overlap as f64 / atoms.len() as f64;
            if score > 0.0 && best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let Some((i, _)) = best else { break };
        let (id, atoms) = remaining.remove(i);
        relevant.extend(atoms);
        selected.push(id.to_string());
    }
    selected
}

/// Levenshtein distance over characters.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Recombines the failed step's facts with every tactic in the tactic set,
/// minus the original pair. Tactics that need facts are skipped when the
/// failed step had none.
pub fn tactic_repair(attempt: &FailedAttempt, config: &RevisionConfig) -> Vec<Candidate> {
    let facts = &attempt.step.facts;
    config
        .tactic_set
        .iter()
        .filter(|t| !(t.requires_facts() && facts.is_empty()))
        .filter(|t| !(**t == attempt.step.tactic))
        .filter_map(|t| Candidate::new(ProofStep::new(*t, facts.clone()), attempt.log_prob, Origin::TacticRepair).ok())
        .collect()
}

/// Replaces each undefined fact name with its nearest pool ids by edit
/// distance (ties by pool order), emitting every combination.
pub fn premise_repair(attempt: &FailedAttempt, pool: &[String], config: &RevisionConfig) -> Vec<Candidate> {
    let state = &attempt.state;
    let step = &attempt.step;
    let mut options: Vec<Vec<&str>> = Vec::with_capacity(step.facts.len());
    let mut any_undefined = false;
    for name in &step.facts {
        if state.resolve(name).is_some() {
            options.push(vec![name.as_str()]);
            continue;
        }
        any_undefined = true;
        let mut scored: Vec<(usize, usize, &str)> = pool
            .iter()
            .enumerate()
            .map(|(i, id)| (edit_distance(name, id), i, id.as_str()))
            .filter(|(d, _, id)| *d <= config.max_edit_distance && state.context.contains(id))
            .collect();
        scored.sort();
        scored.truncate(config.top_matches);
        if scored.is_empty() {
            return Vec::new();
        }
        options.push(scored.into_iter().map(|(_, _, id)| id).collect());
    }
    if !any_undefined {
        return Vec::new();
    }

    let mut combos: Vec<Vec<String>> = vec![Vec::new()];
    for choices in &options {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut next = prefix.clone();
                    next.push(c.to_string());
                    next
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .filter_map(|facts| {
            Candidate::new(ProofStep::new(step.tactic, facts), attempt.log_prob, Origin::PremiseRepair).ok()
        })
        .collect()
}

/// Routes each failure to the matching repair, then dedups by step text
/// (keeping the higher score) and caps the result at `config.budget`.
pub fn revise(failures: &[FailedAttempt], config: &RevisionConfig) -> Vec<Candidate> {
    let mut out = Vec::new();
    for attempt in failures {
        match attempt.category {
            ErrorCategory::TacticFailure | ErrorCategory::NoProgress => {
                out.extend(tactic_repair(attempt, config));
            }
            ErrorCategory::UndefinedFact => {
                let pool = relevance_filter(&attempt.state, &attempt.state.context, config.premise_pool_size);
                out.extend(premise_repair(attempt, &pool, config));
            }
            ErrorCategory::ParseError | ErrorCategory::Timeout => {}
        }
    }
    let mut out = dedup_keep_max(out);
    sort_candidates(&mut out);
    out.truncate(config.budget);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_formula, Formula};
    use crate::state::Subgoal;
    use crate::step::parse_step;
    use std::sync::Arc;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn state_with(goal: &str, facts: &[(&str, &str)]) -> ProofState {
        let ctx = FactContext::new(facts.iter().map(|(k, v)| (k.to_string(), f(v))));
        ProofState::new(vec![Subgoal::goal(f(goal))], Arc::new(ctx))
    }

    fn attempt(state: ProofState, step: &str, category: ErrorCategory) -> FailedAttempt {
        FailedAttempt { state, step: parse_step(step).unwrap(), log_prob: -0.7, category }
    }

    fn texts(c: &[Candidate]) -> Vec<String> {
        c.iter().map(|c| c.step.text()).collect()
    }

    #[test]
    fn relevance_excludes_zero_overlap() {
        let s = state_with("p & q", &[("f1", "p"), ("f2", "r")]);
        assert_eq!(relevance_filter(&s, &s.context, 10), ["f1"]);
    }

    #[test]
    fn relevance_grows_the_symbol_set() {
        let s = state_with("p", &[("f1", "p -> r"), ("f2", "r")]);
        assert_eq!(relevance_filter(&s, &s.context, 10), ["f1", "f2"]);
        assert_eq!(relevance_filter(&s, &s.context, 1), ["f1"]);
    }

    #[test]
    fn relevance_k_zero() {
        let s = state_with("p", &[("f1", "p")]);
        assert!(relevance_filter(&s, &s.context, 0).is_empty());
    }

    #[test]
    fn relevance_prefers_higher_ratio_then_id() {
        let s = state_with("p", &[("b", "p"), ("a", "p"), ("c", "p -> z")]);
        assert_eq!(relevance_filter(&s, &s.context, 10), ["a", "b", "c"]);
    }

    #[test]
    fn edit_distance_fixtures() {
        assert_eq!(edit_distance("x", "x"), 0);
        assert_eq!(edit_distance("set_cap_valid_obj", "set_cap_valid_objs"), 1);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abc"), 3);
    }

    #[test]
    fn tactic_repair_cross_product_minus_original() {
        let config =
            RevisionConfig { tactic_set: vec![Tactic::Simp, Tactic::Auto, Tactic::Apply], ..RevisionConfig::default() };
        let a = attempt(state_with("q", &[("f1", "p")]), "simp [f1]", ErrorCategory::TacticFailure);
        let out = tactic_repair(&a, &config);
        assert_eq!(texts(&out), ["auto [f1]", "apply [f1]"]);
        assert!(out.iter().all(|c| c.log_prob() == -0.7 && c.origin == Origin::TacticRepair));
    }

    #[test]
    fn tactic_repair_without_facts_skips_fact_tactics() {
        let a = attempt(state_with("q", &[]), "intro", ErrorCategory::TacticFailure);
        let out = tactic_repair(&a, &RevisionConfig::default());
        assert_eq!(texts(&out), ["assumption", "split", "left", "right", "simp", "auto"]);
    }

    #[test]
    fn tactic_repair_full_set_size() {
        let a = attempt(state_with("q", &[("f", "q")]), "apply [f]", ErrorCategory::TacticFailure);
        assert_eq!(tactic_repair(&a, &RevisionConfig::default()).len(), Tactic::ALL.len() - 1);
    }

    #[test]
    fn premise_repair_nearest_name() {
        let s = state_with("q", &[("set_cap_valid_objs", "p -> q"), ("other_lemma", "q -> q")]);
        let a = attempt(s, "apply [set_cap_valid_obj]", ErrorCategory::UndefinedFact);
        let pool = vec!["other_lemma".to_string(), "set_cap_valid_objs".to_string()];
        let out = premise_repair(&a, &pool, &RevisionConfig::default());
        assert_eq!(texts(&out), ["apply [set_cap_valid_objs]"]);
        assert_eq!(out[0].origin, Origin::PremiseRepair);
    }

    #[test]
    fn premise_repair_cutoff() {
        let s = state_with("q", &[("abcdef", "q")]);
        let a = attempt(s, "apply [zzzzzz]", ErrorCategory::UndefinedFact);
        assert!(premise_repair(&a, &["abcdef".to_string()], &RevisionConfig::default()).is_empty());
    }

    #[test]
    fn premise_repair_top_matches_and_combinations() {
        let s = state_with("q", &[("fa", "q"), ("fb", "q"), ("fc", "q"), ("fd", "q"), ("ga", "p")]);
        let pool: Vec<String> = ["fa", "fb", "fc", "fd", "ga"].iter().map(|s| s.to_string()).collect();
        let a = attempt(s.clone(), "apply [fx]", ErrorCategory::UndefinedFact);
        assert_eq!(
            texts(&premise_repair(&a, &pool, &RevisionConfig::default())),
            ["apply [fa]", "apply [fb]", "apply [fc]"]
        );

        let config = RevisionConfig { top_matches: 2, ..RevisionConfig::default() };
        let a = attempt(s, "apply [fx, gx]", ErrorCategory::UndefinedFact);
        let out = texts(&premise_repair(&a, &pool, &config));
        // gx: ga at distance 1, then fa at distance 2 (pool order breaks the tie with fb..fd)
        assert_eq!(out, ["apply [fa, ga]", "apply [fa, fa]", "apply [fb, ga]", "apply [fb, fa]"]);
    }

    #[test]
    fn revise_dispatches_and_caps() {
        assert!(revise(&[], &RevisionConfig::default()).is_empty());

        let s = state_with("q", &[("lemma_one", "p -> q")]);
        let failures = vec![
            attempt(s.clone(), "apply [lemma_onx]", ErrorCategory::UndefinedFact),
            attempt(s.clone(), "simp [lemma_one]", ErrorCategory::TacticFailure),
            attempt(s.clone(), "auto", ErrorCategory::Timeout),
            attempt(s, "intro", ErrorCategory::ParseError),
        ];
        let out = texts(&revise(&failures, &RevisionConfig::default()));
        assert!(out.contains(&"apply [lemma_one]".to_string()));
        assert!(out.contains(&"auto [lemma_one]".to_string()));
        assert_eq!(out.len(), Tactic::ALL.len() - 1);
    }

    #[test]
    fn revise_budget_keeps_best() {
        let names: Vec<String> = (0..300).map(|i| format!("fact{i:03}")).collect();
        let facts: Vec<(&str, &str)> = names.iter().map(|n| (n.as_str(), "q")).collect();
        let s = state_with("q", &facts);
        let config = RevisionConfig { tactic_set: vec![Tactic::Auto], ..RevisionConfig::default() };
        let failures: Vec<FailedAttempt> = names
            .iter()
            .enumerate()
            .map(|(i, n)| FailedAttempt {
                state: s.clone(),
                step: ProofStep::with_fact(Tactic::Apply, n),
                log_prob: -(i as f64),
                category: ErrorCategory::TacticFailure,
            })
            .collect();
        let out = revise(&failures, &config);
        assert_eq!(out.len(), 256);
        assert_eq!(out[0].log_prob(), 0.0);
        assert_eq!(out[255].log_prob(), -255.0);
    }

    #[test]
    fn corpus_tactic_ranking() {
        let t = crate::theory::load_theory(
            "theory t\naxiom a: p\ntheorem x: p & p\nproof\nsplit\napply [a]\napply [a]\nqed\nend",
        )
        .unwrap();
        let set = tactic_set_from_corpus([&t]);
        assert_eq!(&set[..3], &[Tactic::Apply, Tactic::Split, Tactic::Assumption]);
        assert_eq!(set.len(), Tactic::ALL.len());
    }
}
