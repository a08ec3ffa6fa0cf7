//! Tactic semantics. Every tactic acts on the first subgoal only.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{ErrorCategory, TheoryError};
use crate::formula::Formula;
use crate::result::StepResult;
use crate::state::{FactContext, ProofState, Subgoal};
use crate::step::{ProofStep, Tactic};
use crate::theory::{EntryKind, Theory};

/// Search depth used by the `auto` tactic.
pub const AUTO_DEPTH: usize = 5;

/// Starting state for a lemma or theorem: one subgoal, no hypotheses.
pub fn init_goal(theory: &Theory, theorem_id: &str) -> Result<ProofState, TheoryError> {
    let entry = theory
        .entry(theorem_id)
        .filter(|e| e.kind != EntryKind::Axiom)
        .ok_or_else(|| TheoryError::UnknownTheorem(theorem_id.to_string()))?;
    let context = theory.context_for(theorem_id).ok_or_else(|| TheoryError::UnknownTheorem(theorem_id.to_string()))?;
    Ok(ProofState::new(vec![Subgoal::goal(entry.statement.clone())], context))
}

struct Fail(ErrorCategory, String);

impl Fail {
    fn tactic(detail: impl Into<String>) -> Self {
        Fail(ErrorCategory::TacticFailure, detail.into())
    }
}

pub fn apply_step(state: &ProofState, step: &ProofStep, budget: Duration) -> StepResult {
    let deadline = Instant::now().checked_add(budget);
    let Some(first) = state.first() else {
        return StepResult::failure(ErrorCategory::TacticFailure, "no subgoals");
    };

    let replacement = match run_tactic(state, first, step, deadline) {
        Ok(subgoals) => subgoals,
        Err(Fail(category, detail)) => return StepResult::Failure { category, detail },
    };

    let mut subgoals = replacement;
    subgoals.extend(state.subgoals[1..].iter().cloned());
    let next = ProofState { subgoals, context: Arc::clone(&state.context), depth: state.depth + 1 };
    if next.key() == state.key() {
        return StepResult::failure(ErrorCategory::NoProgress, format!("`{step}` leaves the state unchanged"));
    }
    StepResult::Success(next)
}

fn run_tactic(
    state: &ProofState,
    sg: &Subgoal,
    step: &ProofStep,
    deadline: Option<Instant>,
) -> Result<Vec<Subgoal>, Fail> {
    let goal = &sg.goal;
    match step.tactic {
        Tactic::Assumption => {
            if closes_by_assumption(sg, &state.context) {
                Ok(Vec::new())
            } else {
                Err(Fail::tactic("goal is not a hypothesis or fact"))
            }
        }
        Tactic::Intro => match goal {
            Formula::Implies(a, b) => Ok(vec![sg.extend([(**a).clone()], (**b).clone())]),
            Formula::Not(a) => Ok(vec![sg.extend([(**a).clone()], Formula::False)]),
            _ => Err(Fail::tactic("intro needs an implication or negation")),
        },
        Tactic::Split => match goal {
            Formula::And(a, b) => Ok(vec![sg.with_goal((**a).clone()), sg.with_goal((**b).clone())]),
            _ => Err(Fail::tactic("split needs a conjunction")),
        },
        Tactic::Left | Tactic::Right => match goal {
            Formula::Or(a, b) => {
                let side = if step.tactic == Tactic::Left { a } else { b };
                Ok(vec![sg.with_goal((**side).clone())])
            }
            _ => Err(Fail::tactic(format!("{} needs a disjunction", step.tactic))),
        },
        Tactic::Simp => {
            let simplified = simplify(goal);
            if simplified == *goal {
                Err(Fail(ErrorCategory::NoProgress, "simp made no progress".into()))
            } else if simplified == Formula::True {
                Ok(Vec::new())
            } else {
                Ok(vec![sg.with_goal(simplified)])
            }
        }
        Tactic::Auto => {
            let mut solver = AutoSolver { context: &state.context, deadline, failed: HashMap::new() };
            match solver.solve(sg, AUTO_DEPTH) {
                Ok(true) => Ok(Vec::new()),
                Ok(false) => Err(Fail::tactic("auto failed")),
                Err(TimedOut) => Err(Fail(ErrorCategory::Timeout, "auto exceeded its time budget".into())),
            }
        }
        Tactic::Elim | Tactic::Apply => {
            let facts = resolve_all(state, step)?;
            if step.tactic == Tactic::Elim {
                for fact in facts {
                    if let Formula::Or(a, b) = fact {
                        return Ok(vec![
                            sg.extend([(**a).clone()], goal.clone()),
                            sg.extend([(**b).clone()], goal.clone()),
                        ]);
                    }
                }
                Err(Fail::tactic("elim needs a disjunction"))
            } else {
                for fact in facts {
                    if let Some(premises) = match_conclusion(fact, goal) {
                        return Ok(premises.into_iter().map(|p| sg.with_goal(p.clone())).collect());
                    }
                }
                Err(Fail::tactic("no fact concludes the goal"))
            }
        }
    }
}

fn resolve_all<'a>(state: &'a ProofState, step: &ProofStep) -> Result<Vec<&'a Formula>, Fail> {
    step.facts
        .iter()
        .map(|name| {
            state.resolve(name).ok_or_else(|| Fail(ErrorCategory::UndefinedFact, format!("undefined fact: {name}")))
        })
        .collect()
}

pub(crate) fn closes_by_assumption(sg: &Subgoal, context: &FactContext) -> bool {
    sg.hypotheses().contains(&sg.goal) || context.facts.values().any(|f| *f == sg.goal)
}

/// Premises `A1..An` if `fact` is `A1 -> ... -> An -> goal` (n may be 0).
/// The match with the fewest premises wins.
pub fn match_conclusion<'a>(fact: &'a Formula, goal: &Formula) -> Option<Vec<&'a Formula>> {
    let mut premises = Vec::new();
    let mut cur = fact;
    loop {
        if cur == goal {
            return Some(premises);
        }
        match cur {
            Formula::Implies(a, b) => {
                premises.push(&**a);
                cur = b;
            }
            _ => return None,
        }
    }
}

/// Boolean-constant folding, applied bottom-up to a fixpoint.
pub fn simplify(f: &Formula) -> Formula {
    use Formula::*;
    match f {
        Atom(_) | True | False => f.clone(),
        Not(a) => match simplify(a) {
            True => False,
            False => True,
            a => Formula::not(a),
        },
        And(a, b) => match (simplify(a), simplify(b)) {
            (False, _) | (_, False) => False,
            (True, x) | (x, True) => x,
            (a, b) => Formula::and(a, b),
        },
        Or(a, b) => match (simplify(a), simplify(b)) {
            (True, _) | (_, True) => True,
            (False, x) | (x, False) => x,
            (a, b) => Formula::or(a, b),
        },
        Implies(a, b) => match (simplify(a), simplify(b)) {
            (False, _) | (_, True) => True,
            (True, x) => x,
            (a, b) => Formula::implies(a, b),
        },
    }
}

struct TimedOut;

/// Depth-bounded backtracking for `auto`: assumption, intro, split, left,
/// right, then `apply` with facts sharing an atom with the goal.
struct AutoSolver<'a> {
    context: &'a FactContext,
    deadline: Option<Instant>,
    failed: HashMap<Subgoal, usize>,
}

impl AutoSolver<'_> {
    fn solve(&mut self, sg: &Subgoal, depth: usize) -> Result<bool, TimedOut> {
        if depth == 0 {
            return Ok(false);
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(TimedOut);
        }
        if self.failed.get(sg).is_some_and(|&d| d >= depth) {
            return Ok(false);
        }
        let solved = self.try_rules(sg, depth)?;
        if !solved {
            let entry = self.failed.entry(sg.clone()).or_insert(0);
            *entry = (*entry).max(depth);
        }
        Ok(solved)
    }

    fn try_rules(&mut self, sg: &Subgoal, depth: usize) -> Result<bool, TimedOut> {
        if closes_by_assumption(sg, self.context) {
            return Ok(true);
        }
        let d = depth - 1;
        match &sg.goal {
            Formula::Implies(a, b) => {
                if self.solve(&sg.extend([(**a).clone()], (**b).clone()), d)? {
                    return Ok(true);
                }
            }
            Formula::Not(a) => {
                if self.solve(&sg.extend([(**a).clone()], Formula::False), d)? {
                    return Ok(true);
                }
            }
            Formula::And(a, b) => {
                if self.solve(&sg.with_goal((**a).clone()), d)? && self.solve(&sg.with_goal((**b).clone()), d)? {
                    return Ok(true);
                }
            }
            Formula::Or(a, b) => {
                if self.solve(&sg.with_goal((**a).clone()), d)? || self.solve(&sg.with_goal((**b).clone()), d)? {
                    return Ok(true);
                }
            }
            _ => {}
        }

        let goal_atoms = sg.goal.atoms();
        let facts: Vec<Formula> = self
            .context
            .facts
            .values()
            .chain(sg.hypotheses())
            .filter(|f| f.atoms().iter().any(|a| goal_atoms.contains(a)))
            .cloned()
            .collect();
        for fact in &facts {
            if let Some(premises) = match_conclusion(fact, &sg.goal) {
                let mut all = true;
                for p in premises {
                    if !self.solve(&sg.with_goal(p.clone()), d)? {
                        all = false;
                        break;
                    }
                }
                if all {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}
