//! Proof steps: `tactic` optionally followed by `[id, id, ...]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{InvalidLogProb, ParseError};
use crate::formula::{is_ident_continue, is_identifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tactic {
    Assumption,
    Intro,
    Split,
    Left,
    Right,
    Simp,
    Auto,
    Elim,
    Apply,
}

impl Tactic {
    pub const ALL: [Tactic; 9] = [
        Tactic::Assumption,
        Tactic::Intro,
        Tactic::Split,
        Tactic::Left,
        Tactic::Right,
        Tactic::Simp,
        Tactic::Auto,
        Tactic::Elim,
        Tactic::Apply,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tactic::Assumption => "assumption",
            Tactic::Intro => "intro",
            Tactic::Split => "split",
            Tactic::Left => "left",
            Tactic::Right => "right",
            Tactic::Simp => "simp",
            Tactic::Auto => "auto",
            Tactic::Elim => "elim",
            Tactic::Apply => "apply",
        }
    }

    pub fn from_name(name: &str) -> Option<Tactic> {
        Self::ALL.into_iter().find(|t| t.as_str() == name)
    }

    /// `elim` and `apply` need at least one fact argument.
    pub fn requires_facts(self) -> bool {
        matches!(self, Tactic::Elim | Tactic::Apply)
    }
}

impl fmt::Display for Tactic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A tactic invocation. Equality and hashing ignore `raw`.
#[derive(Debug, Clone, Eq)]
pub struct ProofStep {
    pub tactic: Tactic,
    pub facts: Vec<String>,
    pub raw: String,
}

impl ProofStep {
    /// Builds a step, panicking if a fact-taking tactic has no facts or a
    /// fact is not an identifier. Use [`parse_step`] for untrusted text.
    pub fn new(tactic: Tactic, facts: Vec<String>) -> Self {
        assert!(!tactic.requires_facts() || !facts.is_empty(), "{tactic} needs at least one fact");
        assert!(facts.iter().all(|f| is_identifier(f)), "fact names must be identifiers");
        let mut step = ProofStep { tactic, facts, raw: String::new() };
        step.raw = step.text();
        step
    }

    pub fn bare(tactic: Tactic) -> Self {
        Self::new(tactic, Vec::new())
    }

    pub fn with_fact(tactic: Tactic, fact: &str) -> Self {
        Self::new(tactic, vec![fact.to_string()])
    }

    /// Normalized rendering, used as the identity of a step.
    pub fn text(&self) -> String {
        if self.facts.is_empty() {
            self.tactic.as_str().to_string()
        } else {
            format!("{} [{}]", self.tactic, self.facts.join(", "))
        }
    }
}

impl PartialEq for ProofStep {
    fn eq(&self, other: &Self) -> bool {
        self.tactic == other.tactic && self.facts == other.facts
    }
}

impl std::hash::Hash for ProofStep {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.tactic.hash(state);
        self.facts.hash(state);
    }
}

impl fmt::Display for ProofStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

impl FromStr for ProofStep {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_step(s)
    }
}

impl Serialize for ProofStep {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text())
    }
}

impl<'de> Deserialize<'de> for ProofStep {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_step(&text).map_err(serde::de::Error::custom)
    }
}

/// Parses one step. Positions in errors are 1-based columns into `text`.
pub fn parse_step(text: &str) -> Result<ProofStep, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_whitespace() {
            *i += 1;
        }
    };
    let found = |i: usize| match chars.get(i) {
        Some(c) => format!("`{c}`"),
        None => "end of input".to_string(),
    };

    skip_ws(&mut i);
    let start = i;
    while i < chars.len() && is_ident_continue(chars[i]) {
        i += 1;
    }
    let name: String = chars[start..i].iter().collect();
    if name.is_empty() {
        return Err(ParseError::new(start + 1, "a tactic name", found(start)));
    }
    let tactic =
        Tactic::from_name(&name).ok_or_else(|| ParseError::new(start + 1, "a tactic name", format!("`{name}`")))?;

    let mut facts = Vec::new();
    skip_ws(&mut i);
    if i < chars.len() && chars[i] == '[' {
        i += 1;
        skip_ws(&mut i);
        if i < chars.len() && chars[i] == ']' {
            i += 1;
        } else {
            loop {
                skip_ws(&mut i);
                let fstart = i;
                while i < chars.len() && is_ident_continue(chars[i]) {
                    i += 1;
                }
                let fact: String = chars[fstart..i].iter().collect();
                if !is_identifier(&fact) {
                    return Err(ParseError::new(fstart + 1, "a fact name", found(fstart)));
                }
                facts.push(fact);
                skip_ws(&mut i);
                match chars.get(i) {
                    Some(',') => i += 1,
                    Some(']') => {
                        i += 1;
                        break;
                    }
                    _ => return Err(ParseError::new(i + 1, "`,` or `]`", found(i))),
                }
            }
        }
    }
    skip_ws(&mut i);
    if i < chars.len() {
        return Err(ParseError::new(i + 1, "end of step", found(i)));
    }
    if tactic.requires_facts() && facts.is_empty() {
        return Err(ParseError::new(chars.len() + 1, "a fact list", "end of step"));
    }
    Ok(ProofStep { tactic, facts, raw: text.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Generated,
    TacticRepair,
    PremiseRepair,
    Hammer,
    GroundTruth,
}

/// A step proposed for a state, with the natural-log probability assigned to it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub step: ProofStep,
    log_prob: f64,
    pub origin: Origin,
}

impl Candidate {
    pub fn new(step: ProofStep, log_prob: f64, origin: Origin) -> Result<Self, InvalidLogProb> {
        if !log_prob.is_finite() || log_prob > 0.0 {
            return Err(InvalidLogProb(log_prob));
        }
        Ok(Candidate { step, log_prob, origin })
    }

    pub fn log_prob(&self) -> f64 {
        self.log_prob
    }
}

impl<'de> Deserialize<'de> for Candidate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            step: ProofStep,
            log_prob: f64,
            origin: Origin,
        }
        let raw = Raw::deserialize(deserializer)?;
        Candidate::new(raw.step, raw.log_prob, raw.origin).map_err(serde::de::Error::custom)
    }
}

/// Sorts by log-probability descending, then step text ascending.
pub(crate) fn sort_candidates(candidates: &mut [Candidate]) {
    candidates.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.step.text().cmp(&b.step.text())));
}

/// Keeps the highest-scoring candidate for each step text, preserving first-seen order.
pub(crate) fn dedup_keep_max(candidates: Vec<Candidate>) -> Vec<Candidate> {
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut out: Vec<Candidate> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let text = cand.step.text();
        match index.get(&text) {
            Some(&i) => {
                if cand.log_prob > out[i].log_prob {
                    out[i] = cand;
                }
            }
            None => {
                index.insert(text, out.len());
                out.push(cand);
            }
        }
    }
    out
}
