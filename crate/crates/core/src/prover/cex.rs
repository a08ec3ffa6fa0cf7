//! Truth-table counterexample search.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::formula::Formula;
use crate::state::{ProofState, Subgoal};

pub const DEFAULT_ATOM_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum CexResult {
    NoCounterexample,
    Counterexample { assignment: BTreeMap<String, bool>, subgoal_index: usize },
    Unknown { reason: String },
}

impl CexResult {
    pub fn is_counterexample(&self) -> bool {
        matches!(self, CexResult::Counterexample { .. })
    }
}

/// Formula over atom indices; bit `i` of the valuation holds atom `i`.
enum Compiled {
    Var(u32),
    Const(bool),
    Not(Box<Compiled>),
    And(Box<Compiled>, Box<Compiled>),
    Or(Box<Compiled>, Box<Compiled>),
    Implies(Box<Compiled>, Box<Compiled>),
}

impl Compiled {
    fn new(f: &Formula, index: &BTreeMap<&str, u32>) -> Self {
        let c = |x: &Formula| Box::new(Compiled::new(x, index));
        match f {
            Formula::Atom(name) => Compiled::Var(index[name.as_str()]),
            Formula::True => Compiled::Const(true),
            Formula::False => Compiled::Const(false),
            Formula::Not(a) => Compiled::Not(c(a)),
            Formula::And(a, b) => Compiled::And(c(a), c(b)),
            Formula::Or(a, b) => Compiled::Or(c(a), c(b)),
            Formula::Implies(a, b) => Compiled::Implies(c(a), c(b)),
        }
    }

    fn eval(&self, bits: u64) -> bool {
        match self {
            Compiled::Var(i) => bits >> i & 1 == 1,
            Compiled::Const(b) => *b,
            Compiled::Not(a) => !a.eval(bits),
            Compiled::And(a, b) => a.eval(bits) && b.eval(bits),
            Compiled::Or(a, b) => a.eval(bits) || b.eval(bits),
            Compiled::Implies(a, b) => !a.eval(bits) || b.eval(bits),
        }
    }
}

/// Enumerates valuations of each subgoal's atoms together with the context's
/// atoms, in lexicographic atom order with `false` before `true`. The first
/// falsifying valuation of the first falsifiable subgoal is returned.
pub fn check_counterexample(state: &ProofState, atom_limit: usize) -> CexResult {
    let mut context_atoms = BTreeSet::new();
    for f in state.context.facts.values() {
        f.collect_atoms(&mut context_atoms);
    }

    let mut unknown = None;
    for (i, sg) in state.subgoals.iter().enumerate() {
        let mut atoms = context_atoms.clone();
        atoms.extend(sg.atoms());
        if atoms.len() > atom_limit.min(63) {
            unknown
                .get_or_insert_with(|| format!("subgoal {} has {} atoms, limit is {atom_limit}", i + 1, atoms.len()));
            continue;
        }
        if let Some(assignment) = falsify(sg, state.context.facts.values(), &atoms) {
            return CexResult::Counterexample { assignment, subgoal_index: i };
        }
    }
    match unknown {
        Some(reason) => CexResult::Unknown { reason },
        None => CexResult::NoCounterexample,
    }
}

fn falsify<'a>(
    sg: &'a Subgoal,
    facts: impl Iterator<Item = &'a Formula>,
    atoms: &BTreeSet<&str>,
) -> Option<BTreeMap<String, bool>> {
    let n = atoms.len() as u32;
    // First atom is the most significant bit so counting up enumerates
    // valuations lexicographically with false < true.
    let index: BTreeMap<&str, u32> = atoms.iter().enumerate().map(|(i, a)| (*a, n - 1 - i as u32)).collect();
    let premises: Vec<Compiled> = facts.chain(sg.hypotheses()).map(|f| Compiled::new(f, &index)).collect();
    let goal = Compiled::new(&sg.goal, &index);

    (0..1u64 << n)
        .find(|&bits| !goal.eval(bits) && premises.iter().all(|p| p.eval(bits)))
        .map(|bits| index.iter().map(|(atom, i)| (atom.to_string(), bits >> i & 1 == 1)).collect())
}

/// Whether `assignment` satisfies all hypotheses of the subgoal and all
/// context facts while falsifying the goal. Uses plain recursive evaluation.
pub fn verify_counterexample(state: &ProofState, assignment: &BTreeMap<String, bool>, subgoal_index: usize) -> bool {
    let Some(sg) = state.subgoals.get(subgoal_index) else {
        return false;
    };
    let value = |a: &str| assignment.get(a).copied().unwrap_or(false);
    sg.hypotheses().iter().chain(state.context.facts.values()).all(|f| f.eval(&value)) && !sg.goal.eval(&value)
}
