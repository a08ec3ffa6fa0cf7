//! Seeded propositional benchmark corpus. Every theorem lives in its own
//! small theory and carries a ground-truth proof built alongside it.

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::TheoryError;
use crate::formula::{is_identifier, Formula};
use crate::prover::{apply_step, init_goal};
use crate::revision::edit_distance;
use crate::state::FactContext;
use crate::step::{ProofStep, Tactic};
use crate::theory::{Entry, EntryKind, Theory};

const ATOMS: [&str; 14] = [
    "invs",
    "valid_objs",
    "cur_tcb",
    "valid_pspace",
    "sym_refs",
    "if_live",
    "zombies_final",
    "valid_mdb",
    "irq_handlers",
    "valid_asid",
    "ct_active",
    "valid_idle",
    "arch_state",
    "cap_refs",
];

const OBJECTS: [&str; 16] = [
    "cap", "cte", "tcb", "vspace", "asid", "irq", "ntfn", "endpoint", "untyped", "frame", "sched", "domain", "reply",
    "pspace", "mdb", "arch",
];
const ACTIONS: [&str; 16] = [
    "insert", "delete", "revoke", "lookup", "retype", "bind", "cancel", "map", "unmap", "derive", "move", "swap",
    "install", "invoke", "decode", "recycle",
];
const PROPERTIES: [&str; 10] = ["invs", "valid", "wp", "inv", "corres", "sound", "ok", "preserved", "sym", "live"];

/// Fact names inside one theory are at least this far apart.
pub const MIN_NAME_DISTANCE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `x0`, `x0 -> x1`, ... proves `xn`.
    Chain,
    /// `x0 -> xn` through a chain of implications.
    Implication,
    /// Conjunction of a fact and a one-step consequence.
    Conjunction,
    /// `~x0` where `x0` leads to `false`.
    Refutation,
    /// Case analysis on an axiom disjunction.
    CaseSplit,
    /// A goal padded with `true` that needs `simp` first.
    Simplification,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Chain,
        Family::Implication,
        Family::Conjunction,
        Family::Refutation,
        Family::CaseSplit,
        Family::Simplification,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Chain => "chain",
            Family::Implication => "implication",
            Family::Conjunction => "conjunction",
            Family::Refutation => "refutation",
            Family::CaseSplit => "case_split",
            Family::Simplification => "simplification",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One slot of the repeating family schedule, with its size range.
#[derive(Debug, Clone, Copy)]
struct Slot {
    family: Family,
    size: (usize, usize),
}

const fn slot(family: Family, lo: usize, hi: usize) -> Slot {
    Slot { family, size: (lo, hi) }
}

/// Twenty slots, cycled. Sizes are inclusive ranges of the recipe's
/// length parameter.
const SCHEDULE: [Slot; 20] = [
    slot(Family::Chain, 1, 3),
    slot(Family::Refutation, 1, 2),
    slot(Family::CaseSplit, 1, 2),
    slot(Family::Chain, 5, 7),
    slot(Family::Implication, 1, 2),
    slot(Family::Refutation, 1, 2),
    slot(Family::Simplification, 1, 2),
    slot(Family::Chain, 1, 3),
    slot(Family::Refutation, 3, 4),
    slot(Family::CaseSplit, 1, 2),
    slot(Family::Conjunction, 1, 1),
    slot(Family::Refutation, 1, 2),
    slot(Family::Chain, 5, 7),
    slot(Family::Implication, 1, 2),
    slot(Family::Simplification, 1, 2),
    slot(Family::Refutation, 1, 2),
    slot(Family::CaseSplit, 1, 2),
    slot(Family::Chain, 1, 3),
    slot(Family::Refutation, 3, 4),
    slot(Family::Chain, 5, 7),
];

#[derive(Debug, Clone)]
pub struct BenchTheorem {
    pub index: usize,
    pub family: Family,
    /// The recipe's length parameter.
    pub size: usize,
    pub theory: Arc<Theory>,
    pub source: String,
    pub theorem: String,
}

impl BenchTheorem {
    pub fn ground_truth(&self) -> &[ProofStep] {
        self.theory.entry(&self.theorem).and_then(|e| e.proof.as_deref()).unwrap_or_default()
    }
}

/// Builds `size` theorems from `seed`. The same seed always yields the same
/// sources. Every ground-truth proof is checked by replay before returning.
pub fn generate_corpus(seed: u64, size: usize) -> Result<Vec<BenchTheorem>, TheoryError> {
    (0..size).map(|i| generate_theorem(seed, i)).collect()
}

pub fn generate_theorem(seed: u64, index: usize) -> Result<BenchTheorem, TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64);
    let slot = SCHEDULE[index % SCHEDULE.len()];
    let size = rng.gen_range(slot.size.0..=slot.size.1);

    let mut atoms: Vec<&str> = ATOMS.to_vec();
    atoms.shuffle(&mut rng);
    let mut builder = Builder { rng, facts: Vec::new(), names: Vec::new(), proof: Vec::new() };
    let (goal, used) = builder.recipe(slot.family, size, &atoms);
    builder.distractors(&atoms[used..], &goal);
    builder.facts.shuffle(&mut builder.rng);

    let theorem = format!("thm_{index:03}");
    let mut entries: Vec<Entry> = builder
        .facts
        .into_iter()
        .map(|(id, statement)| Entry { kind: EntryKind::Axiom, id, statement, proof: None })
        .collect();
    entries.push(Entry { kind: EntryKind::Theorem, id: theorem.clone(), statement: goal, proof: Some(builder.proof) });
    let theory = Theory::new(format!("bench_{index:03}"), entries)?;
    check_ground_truth(&theory, &theorem)?;
    let source = theory.to_source();
    Ok(BenchTheorem { index, family: slot.family, size, theory: Arc::new(theory), source, theorem })
}

fn check_ground_truth(theory: &Theory, theorem: &str) -> Result<(), TheoryError> {
    let mut state = init_goal(theory, theorem)?;
    let proof = theory.entry(theorem).and_then(|e| e.proof.clone()).unwrap_or_default();
    for step in &proof {
        match apply_step(&state, step, Duration::from_secs(10)).state() {
            Some(next) => state = next.clone(),
            None => return Err(TheoryError::UnknownTheorem(format!("{theorem}: ground truth fails at `{step}`"))),
        }
    }
    if !state.is_complete() {
        return Err(TheoryError::UnknownTheorem(format!("{theorem}: ground truth leaves subgoals")));
    }
    Ok(())
}

struct Builder {
    rng: ChaCha8Rng,
    facts: Vec<(String, Formula)>,
    names: Vec<String>,
    proof: Vec<ProofStep>,
}

fn atom(name: &str) -> Formula {
    Formula::atom(name)
}

impl Builder {
    fn fresh_name(&mut self) -> String {
        loop {
            let name = format!(
                "{}_{}_{}",
                OBJECTS.choose(&mut self.rng).unwrap(),
                ACTIONS.choose(&mut self.rng).unwrap(),
                PROPERTIES.choose(&mut self.rng).unwrap()
            );
            if self.names.iter().all(|n| edit_distance(n, &name) >= MIN_NAME_DISTANCE) {
                self.names.push(name.clone());
                return name;
            }
        }
    }

    fn fact(&mut self, statement: Formula) -> String {
        let name = self.fresh_name();
        self.facts.push((name.clone(), statement));
        name
    }

    fn step(&mut self, tactic: Tactic, fact: Option<&str>) {
        self.proof.push(match fact {
            Some(f) => ProofStep::with_fact(tactic, f),
            None => ProofStep::bare(tactic),
        });
    }

    /// Implications `xs[0] -> xs[1] -> ...`; returns their names in order.
    fn chain(&mut self, xs: &[&str]) -> Vec<String> {
        xs.windows(2).map(|w| self.fact(Formula::implies(atom(w[0]), atom(w[1])))).collect()
    }

    /// Backward proof of `xs.last()` from `xs[0]` through `links`, ending
    /// with `assumption` once the goal is `xs[0]`.
    fn apply_back(&mut self, links: &[String]) {
        for name in links.iter().rev() {
            self.step(Tactic::Apply, Some(name));
        }
        self.step(Tactic::Assumption, None);
    }

    /// Adds the recipe's facts and proof; returns the goal and how many
    /// atoms it consumed from the front of `xs`.
    fn recipe(&mut self, family: Family, n: usize, xs: &[&str]) -> (Formula, usize) {
        match family {
            Family::Chain => {
                self.fact(atom(xs[0]));
                let links = self.chain(&xs[..=n]);
                self.apply_back(&links);
                (atom(xs[n]), n + 1)
            }
            Family::Implication => {
                let links = self.chain(&xs[..=n]);
                self.step(Tactic::Intro, None);
                self.apply_back(&links);
                (Formula::implies(atom(xs[0]), atom(xs[n])), n + 1)
            }
            Family::Conjunction => {
                self.fact(atom(xs[0]));
                self.fact(atom(xs[2]));
                let link = self.fact(Formula::implies(atom(xs[2]), atom(xs[1])));
                self.step(Tactic::Split, None);
                self.step(Tactic::Assumption, None);
                self.apply_back(&[link]);
                (Formula::and(atom(xs[0]), atom(xs[1])), 3)
            }
            Family::Refutation => {
                let links = self.chain(&xs[..n]);
                let absurd = self.fact(Formula::implies(atom(xs[n - 1]), Formula::False));
                self.step(Tactic::Intro, None);
                self.step(Tactic::Apply, Some(&absurd));
                self.apply_back(&links);
                (Formula::not(atom(xs[0])), n)
            }
            Family::CaseSplit => {
                // xs[0] | xs[1], each side reaching xs[2] through its own chain.
                let q = self.rng.gen_range(1..=2);
                let goal = xs[2];
                let mut left = vec![xs[0]];
                left.extend(&xs[3..3 + n - 1]);
                left.push(goal);
                let mut right = vec![xs[1]];
                right.extend(&xs[3 + n - 1..3 + n - 1 + q - 1]);
                right.push(goal);
                let split = self.fact(Formula::or(atom(xs[0]), atom(xs[1])));
                let left_links = self.chain(&left);
                let right_links = self.chain(&right);
                self.step(Tactic::Elim, Some(&split));
                self.apply_back(&left_links);
                self.apply_back(&right_links);
                (atom(goal), 3 + (n - 1) + (q - 1))
            }
            Family::Simplification => {
                self.fact(atom(xs[0]));
                let links = self.chain(&xs[..=n]);
                let padded = if self.rng.gen_bool(0.5) {
                    Formula::and(atom(xs[n]), Formula::True)
                } else {
                    Formula::and(Formula::True, atom(xs[n]))
                };
                self.step(Tactic::Simp, None);
                self.apply_back(&links);
                (padded, n + 1)
            }
        }
    }

    /// Unrelated implications and a disjunction over unused atoms, plus one
    /// trap: a fact concluding the goal from an atom nothing establishes.
    fn distractors(&mut self, spare: &[&str], goal: &Formula) {
        let Some((&trap, rest)) = spare.split_first() else {
            return;
        };
        let target = match goal {
            Formula::Not(_) => Formula::False,
            Formula::And(a, b) => match (&**a, &**b) {
                (Formula::True, x) | (x, _) => x.clone(),
            },
            Formula::Implies(_, b) => (**b).clone(),
            g => g.clone(),
        };
        self.fact(Formula::implies(atom(trap), target));

        let pairs = self.rng.gen_range(1..=2usize).min(rest.len() / 2);
        for i in 0..pairs {
            self.fact(Formula::implies(atom(rest[2 * i]), atom(rest[2 * i + 1])));
        }
        if rest.len() >= 2 * pairs + 2 && self.rng.gen_bool(0.5) {
            self.fact(Formula::or(atom(rest[2 * pairs]), atom(rest[2 * pairs + 1])));
        }
    }
}

/// A misspelling of `name` at edit distance 1 or 2, using lowercase letters,
/// that is still an identifier and names nothing in `context`.
pub fn corrupt_name(name: &str, context: &FactContext, rng: &mut impl Rng) -> String {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    loop {
        let mut chars: Vec<char> = name.chars().collect();
        for _ in 0..rng.gen_range(1..=2) {
            let letter = LETTERS[rng.gen_range(0..LETTERS.len())] as char;
            match rng.gen_range(0..3) {
                0 => {
                    let i = rng.gen_range(0..chars.len());
                    chars[i] = letter;
                }
                1 => chars.insert(rng.gen_range(0..=chars.len()), letter),
                _ if chars.len() > 1 => {
                    chars.remove(rng.gen_range(0..chars.len()));
                }
                _ => {}
            }
        }
        let out: String = chars.into_iter().collect();
        let distance = edit_distance(name, &out);
        let hypothesis_like =
            out.strip_prefix('h').is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()));
        if (1..=2).contains(&distance) && is_identifier(&out) && !context.contains(&out) && !hypothesis_like {
            return out;
        }
    }
}

/// Replaces one context fact name in `step` with a misspelling. Steps that
/// only name hypotheses or no facts come back unchanged.
pub fn corrupt_step(step: &ProofStep, context: &FactContext, rng: &mut impl Rng) -> ProofStep {
    let candidates: Vec<usize> = (0..step.facts.len()).filter(|&i| context.contains(&step.facts[i])).collect();
    let Some(&i) = candidates.choose(rng) else {
        return step.clone();
    };
    let mut facts = step.facts.clone();
    facts[i] = corrupt_name(&facts[i], context, rng);
    ProofStep::new(step.tactic, facts)
}
