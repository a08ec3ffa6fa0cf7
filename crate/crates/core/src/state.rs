//! Proof states, their text rendering, and the canonical dedup key.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::formula::{parse_formula, Formula};

/// Key of the proof state with no subgoals left.
pub const QED_KEY: &str = "QED";

/// Facts visible to a theorem, plus how often each fact is used in ground-truth proofs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactContext {
    pub facts: BTreeMap<String, Formula>,
    pub usage_counts: BTreeMap<String, u32>,
}

impl FactContext {
    pub fn new(facts: impl IntoIterator<Item = (String, Formula)>) -> Self {
        FactContext { facts: facts.into_iter().collect(), usage_counts: BTreeMap::new() }
    }

    pub fn get(&self, id: &str) -> Option<&Formula> {
        self.facts.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.facts.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.facts.keys().map(String::as_str)
    }

    pub fn usage(&self, id: &str) -> u32 {
        self.usage_counts.get(id).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

/// `hypotheses ⊢ goal`. Hypotheses are kept sorted and free of duplicates, so
/// two subgoals that differ only in hypothesis order are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subgoal {
    hypotheses: Vec<Formula>,
    pub goal: Formula,
}

impl Subgoal {
    pub fn new(hypotheses: impl IntoIterator<Item = Formula>, goal: Formula) -> Self {
        let mut hypotheses: Vec<Formula> = hypotheses.into_iter().collect();
        hypotheses.sort();
        hypotheses.dedup();
        Subgoal { hypotheses, goal }
    }

    pub fn goal(goal: Formula) -> Self {
        Subgoal { hypotheses: Vec::new(), goal }
    }

    pub fn hypotheses(&self) -> &[Formula] {
        &self.hypotheses
    }

    /// Same hypotheses plus `extra`, with a new goal.
    pub fn extend(&self, extra: impl IntoIterator<Item = Formula>, goal: Formula) -> Subgoal {
        Subgoal::new(self.hypotheses.iter().cloned().chain(extra), goal)
    }

    pub fn with_goal(&self, goal: Formula) -> Subgoal {
        Subgoal { hypotheses: self.hypotheses.clone(), goal }
    }

    /// Hypotheses are addressable in steps as `h0`, `h1`, ... in stored order.
    pub fn hypothesis_name(index: usize) -> String {
        format!("h{index}")
    }

    pub fn hypothesis_by_name(&self, name: &str) -> Option<&Formula> {
        let index: usize = name.strip_prefix('h')?.parse().ok()?;
        if name != Self::hypothesis_name(index) {
            return None;
        }
        self.hypotheses.get(index)
    }

    pub fn atoms(&self) -> std::collections::BTreeSet<&str> {
        let mut out = std::collections::BTreeSet::new();
        for h in &self.hypotheses {
            h.collect_atoms(&mut out);
        }
        self.goal.collect_atoms(&mut out);
        out
    }

    fn render(&self) -> String {
        if self.hypotheses.is_empty() {
            format!("⊢ {}", self.goal)
        } else {
            let hyps: Vec<String> = self.hypotheses.iter().map(Formula::to_string).collect();
            format!("{} ⊢ {}", hyps.join(", "), self.goal)
        }
    }
}

impl fmt::Display for Subgoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone)]
pub struct ProofState {
    pub subgoals: Vec<Subgoal>,
    pub context: Arc<FactContext>,
    pub depth: usize,
}

impl ProofState {
    pub fn new(subgoals: Vec<Subgoal>, context: Arc<FactContext>) -> Self {
        ProofState { subgoals, context, depth: 0 }
    }

    pub fn is_complete(&self) -> bool {
        self.subgoals.is_empty()
    }

    pub fn first(&self) -> Option<&Subgoal> {
        self.subgoals.first()
    }

    pub fn key(&self) -> String {
        canonical_state(self)
    }

    /// Looks up a fact name: context facts first, then the first subgoal's
    /// hypotheses by `h<i>` name.
    pub fn resolve(&self, name: &str) -> Option<&Formula> {
        self.context.get(name).or_else(|| self.first().and_then(|sg| sg.hypothesis_by_name(name)))
    }

    /// Text rendering shared by prompts, datasets, and the wire protocol.
    pub fn render(&self) -> String {
        render_subgoals(&self.subgoals)
    }
}

impl PartialEq for ProofState {
    fn eq(&self, other: &Self) -> bool {
        self.subgoals == other.subgoals
            && self.depth == other.depth
            && (Arc::ptr_eq(&self.context, &other.context) || self.context == other.context)
    }
}

impl fmt::Display for ProofState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn render_subgoals(subgoals: &[Subgoal]) -> String {
    if subgoals.is_empty() {
        return "No subgoals!".to_string();
    }
    let plural = if subgoals.len() == 1 { "" } else { "s" };
    let mut out = format!("goal ({} subgoal{plural}):", subgoals.len());
    for (i, sg) in subgoals.iter().enumerate() {
        out.push_str(&format!("\n {}. {}", i + 1, sg));
    }
    out
}

/// Dedup key: invariant under subgoal and hypothesis permutation.
pub fn canonical_state(state: &ProofState) -> String {
    canonical_key(&state.subgoals)
}

pub fn canonical_key(subgoals: &[Subgoal]) -> String {
    if subgoals.is_empty() {
        return QED_KEY.to_string();
    }
    let mut keys: Vec<String> = subgoals.iter().map(Subgoal::render).collect();
    keys.sort();
    keys.join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("state line {line}: {message}")]
pub struct StateParseError {
    pub line: usize,
    pub message: String,
}

/// Inverse of [`ProofState::render`]; the context is supplied by the caller.
pub fn parse_state(text: &str, context: Arc<FactContext>) -> Result<ProofState, StateParseError> {
    let err = |line: usize, message: String| StateParseError { line, message };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(err(1, "empty state text".into()));
    };
    let header = header.trim();
    if header == "No subgoals!" {
        if let Some((n, _)) = lines.next() {
            return Err(err(n + 1, "unexpected text after `No subgoals!`".into()));
        }
        return Ok(ProofState::new(Vec::new(), context));
    }
    let count: usize = header
        .strip_prefix("goal (")
        .and_then(|rest| rest.split_once(' '))
        .and_then(|(n, _)| n.parse().ok())
        .ok_or_else(|| err(1, format!("bad header `{header}`")))?;

    let mut subgoals = Vec::with_capacity(count);
    for (n, line) in lines {
        let line_no = n + 1;
        let expected = format!("{}.", subgoals.len() + 1);
        let body = line
            .trim()
            .strip_prefix(&expected)
            .ok_or_else(|| err(line_no, format!("expected subgoal `{expected}`")))?;
        let (hyps, goal) = body.split_once('⊢').ok_or_else(|| err(line_no, "missing `⊢`".into()))?;
        let goal = parse_formula(goal.trim()).map_err(|e| err(line_no, e.to_string()))?;
        let mut hypotheses = Vec::new();
        if !hyps.trim().is_empty() {
            for h in hyps.split(',') {
                hypotheses.push(parse_formula(h.trim()).map_err(|e| err(line_no, e.to_string()))?);
            }
        }
        subgoals.push(Subgoal::new(hypotheses, goal));
    }
    if subgoals.len() != count {
        return Err(err(1, format!("header promises {count} subgoals, found {}", subgoals.len())));
    }
    Ok(ProofState::new(subgoals, context))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn state(subgoals: Vec<Subgoal>) -> ProofState {
        ProofState::new(subgoals, Arc::new(FactContext::default()))
    }

    #[test]
    fn key_ignores_subgoal_order() {
        let a = Subgoal::new([f("a")], f("g1"));
        let b = Subgoal::new([f("b")], f("g2"));
        assert_eq!(state(vec![a.clone(), b.clone()]).key(), state(vec![b, a]).key());
    }

    #[test]
    fn empty_state_key_is_qed() {
        assert_eq!(state(vec![]).key(), "QED");
    }

    #[test]
    fn key_ignores_hypothesis_order() {
        let x = state(vec![Subgoal::new([f("p"), f("q")], f("r"))]);
        let y = state(vec![Subgoal::new([f("q"), f("p")], f("r"))]);
        assert_eq!(x.key(), y.key());
    }

    #[test]
    fn key_separates_different_multisets() {
        let one = state(vec![Subgoal::goal(f("p"))]);
        let two = state(vec![Subgoal::goal(f("p")), Subgoal::goal(f("p"))]);
        assert_ne!(one.key(), two.key());
        let other = state(vec![Subgoal::new([f("q")], f("p"))]);
        assert_ne!(one.key(), other.key());
    }

    #[test]
    fn render_and_parse() {
        let s = state(vec![Subgoal::new([f("p -> q"), f("p")], f("q")), Subgoal::goal(f("a & b"))]);
        let text = s.render();
        assert_eq!(text, "goal (2 subgoals):\n 1. p, p -> q ⊢ q\n 2. ⊢ a & b");
        let back = parse_state(&text, s.context.clone()).unwrap();
        assert_eq!(back, s);
        assert_eq!(parse_state("No subgoals!", s.context.clone()).unwrap().key(), "QED");
    }

    #[test]
    fn parse_state_errors() {
        let ctx = Arc::new(FactContext::default());
        assert!(parse_state("", ctx.clone()).is_err());
        assert!(parse_state("goal (2 subgoals):\n 1. ⊢ p", ctx.clone()).is_err());
        assert!(parse_state("goal (1 subgoal):\n 1. p", ctx.clone()).is_err());
        assert!(parse_state("goal (1 subgoal):\n 1. ⊢ p &", ctx).is_err());
    }

    #[test]
    fn hypothesis_names() {
        let sg = Subgoal::new([f("q"), f("p")], f("r"));
        assert_eq!(sg.hypothesis_by_name("h0"), Some(&f("p")));
        assert_eq!(sg.hypothesis_by_name("h1"), Some(&f("q")));
        assert_eq!(sg.hypothesis_by_name("h2"), None);
        assert_eq!(sg.hypothesis_by_name("h01"), None);
        assert_eq!(sg.hypothesis_by_name("hx"), None);
    }

    #[test]
    fn context_shadows_hypothesis_names() {
        let ctx = Arc::new(FactContext::new([("h0".to_string(), f("z"))]));
        let s = ProofState::new(vec![Subgoal::new([f("p")], f("q"))], ctx);
        assert_eq!(s.resolve("h0"), Some(&f("z")));
    }
}
