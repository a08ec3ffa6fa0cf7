//! Theory files: named axioms, lemmas, and theorems with optional proofs.
//!
//! ```text
//! theory demo
//! axiom f1: p
//! axiom f2: p -> q
//! theorem t1: q
//!   proof
//!     apply [f2]
//!     apply [f1]
//!   qed
//! end
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::TheoryError;
use crate::formula::{is_identifier, parse_formula, Formula};
use crate::state::FactContext;
use crate::step::{parse_step, ProofStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Axiom,
    Lemma,
    Theorem,
}

impl EntryKind {
    fn keyword(self) -> &'static str {
        match self {
            EntryKind::Axiom => "axiom",
            EntryKind::Lemma => "lemma",
            EntryKind::Theorem => "theorem",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub kind: EntryKind,
    pub id: String,
    pub statement: Formula,
    pub proof: Option<Vec<ProofStep>>,
}

#[derive(Debug, Clone)]
pub struct Theory {
    pub name: String,
    pub entries: Vec<Entry>,
    contexts: Vec<Arc<FactContext>>,
}

impl Theory {
    /// Builds a theory from entries in declaration order.
    pub fn new(name: impl Into<String>, entries: Vec<Entry>) -> Result<Self, TheoryError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(TheoryError::DuplicateId(e.id.clone()));
            }
        }

        // Usage counts only see proofs declared earlier, so an entry's own
        // proof never ranks its premises.
        let mut usage: BTreeMap<String, u32> = BTreeMap::new();
        let axioms: Vec<(String, Formula)> = entries
            .iter()
            .filter(|e| e.kind == EntryKind::Axiom)
            .map(|e| (e.id.clone(), e.statement.clone()))
            .collect();
        let mut contexts = Vec::with_capacity(entries.len());
        let mut visible: BTreeMap<String, Formula> = axioms.into_iter().collect();
        for e in &entries {
            let mut facts = visible.clone();
            facts.remove(&e.id);
            let usage_counts =
                usage.iter().filter(|(id, _)| facts.contains_key(*id)).map(|(id, n)| (id.clone(), *n)).collect();
            contexts.push(Arc::new(FactContext { facts, usage_counts }));
            visible.insert(e.id.clone(), e.statement.clone());
            for fact in e.proof.iter().flatten().flat_map(|s| &s.facts) {
                if seen.contains(fact.as_str()) {
                    *usage.entry(fact.clone()).or_default() += 1;
                }
            }
        }

        Ok(Theory { name: name.into(), entries, contexts })
    }

    pub fn entry(&self, id: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.id == id)
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.id == id)
    }

    /// Axioms plus statements of all entries declared before `id`.
    pub fn context_for(&self, id: &str) -> Option<Arc<FactContext>> {
        self.index_of(id).map(|i| self.contexts[i].clone())
    }

    pub fn theorems(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| e.kind == EntryKind::Theorem)
    }

    /// Entries that can be started as proof goals (lemmas and theorems).
    pub fn provable(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| e.kind != EntryKind::Axiom)
    }

    pub fn to_source(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "theory {}", self.name)?;
        for e in &self.entries {
            writeln!(f, "{} {}: {}", e.kind.keyword(), e.id, e.statement)?;
            if let Some(proof) = &e.proof {
                writeln!(f, "  proof")?;
                for step in proof {
                    writeln!(f, "    {step}")?;
                }
                writeln!(f, "  qed")?;
            }
        }
        writeln!(f, "end")
    }
}

/// FNV-1a digest of a theory source, used as its cache key.
pub fn source_digest(source: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in source.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{hash:016x}")
}

pub fn load_theory(source: &str) -> Result<Theory, TheoryError> {
    let syntax = |line: usize, message: String| TheoryError::Syntax { line, message };

    let mut name: Option<String> = None;
    let mut entries: Vec<Entry> = Vec::new();
    let mut in_proof: Option<usize> = None;
    let mut ended = false;

    for (n, raw_line) in source.lines().enumerate() {
        let line_no = n + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if ended {
            return Err(syntax(line_no, format!("text after `end`: `{line}`")));
        }
        if in_proof.is_some() {
            if line == "qed" {
                in_proof = None;
                continue;
            }
            let step = parse_step(line).map_err(|e| syntax(line_no, e.to_string()))?;
            if let Some(proof) = entries.last_mut().and_then(|e| e.proof.as_mut()) {
                proof.push(step);
            }
            continue;
        }

        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match keyword {
            "theory" => {
                if name.is_some() {
                    return Err(syntax(line_no, "nested `theory` header".into()));
                }
                if !is_identifier(rest) {
                    return Err(syntax(line_no, format!("bad theory name `{rest}`")));
                }
                name = Some(rest.to_string());
            }
            "end" if rest.is_empty() => {
                if name.is_none() {
                    return Err(syntax(line_no, "`end` without `theory`".into()));
                }
                ended = true;
            }
            "proof" if rest.is_empty() => {
                let Some(last) = entries.last_mut() else {
                    return Err(syntax(line_no, "`proof` without a preceding entry".into()));
                };
                if last.kind == EntryKind::Axiom {
                    return Err(syntax(line_no, "axioms cannot have proofs".into()));
                }
                if last.proof.is_some() {
                    return Err(syntax(line_no, format!("second proof for `{}`", last.id)));
                }
                last.proof = Some(Vec::new());
                in_proof = Some(line_no);
            }
            "axiom" | "lemma" | "theorem" => {
                if name.is_none() {
                    return Err(syntax(line_no, "entry before `theory` header".into()));
                }
                let kind = match keyword {
                    "axiom" => EntryKind::Axiom,
                    "lemma" => EntryKind::Lemma,
                    _ => EntryKind::Theorem,
                };
                let (id, statement) =
                    rest.split_once(':').ok_or_else(|| syntax(line_no, "expected `<id>: <formula>`".into()))?;
                let id = id.trim();
                if !is_identifier(id) {
                    return Err(syntax(line_no, format!("bad entry id `{id}`")));
                }
                if entries.iter().any(|e| e.id == id) {
                    return Err(TheoryError::DuplicateId(id.to_string()));
                }
                let statement = parse_formula(statement.trim()).map_err(|e| syntax(line_no, e.to_string()))?;
                entries.push(Entry { kind, id: id.to_string(), statement, proof: None });
            }
            _ => return Err(syntax(line_no, format!("unexpected `{line}`"))),
        }
    }

    if let Some(line) = in_proof {
        return Err(syntax(line, "proof block is missing `qed`".into()));
    }
    let Some(name) = name else {
        return Err(syntax(1, "missing `theory` header".into()));
    };
    if !ended {
        return Err(syntax(source.lines().count().max(1), "missing `end`".into()));
    }
    Theory::new(name, entries)
}
