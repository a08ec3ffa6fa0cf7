//! Success tables, line coverage, the prefix-completion curve, effort
//! saving, and proof similarity.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{ProverBackend, TheoryHandle};
use crate::engine::{Outcome, TheoremReport};
use crate::extraction::ReplayFailure;
use crate::generator::StepGenerator;
use crate::result::StepResult;
use crate::revision::edit_distance;
use crate::search::{search_from, SearchConfig, SearchError, SearchOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub theorem: String,
    pub split: String,
    /// Theory (session) the theorem belongs to.
    pub session_tag: String,
    pub ground_truth_length: usize,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_proof: Option<Vec<String>>,
    pub wall_time_ms: u64,
}

impl RunRecord {
    pub fn from_report(report: &TheoremReport, split: &str) -> Self {
        RunRecord {
            theorem: report.theorem.clone(),
            split: split.to_string(),
            session_tag: report.theory.clone(),
            ground_truth_length: report.ground_truth_length.unwrap_or(0),
            outcome: report.outcome,
            generated_proof: report.proof.clone(),
            wall_time_ms: report.wall_time_ms,
        }
    }

    pub fn proved(&self) -> bool {
        self.outcome == Outcome::Proved
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Split,
    LengthBucket,
    SessionTag,
}

pub const LENGTH_BUCKETS: [&str; 5] = ["1", "2", "3-5", "6-10", ">10"];

/// Bucket label for a ground-truth length; 0 has no bucket.
pub fn length_bucket(length: usize) -> Option<&'static str> {
    match length {
        0 => None,
        1 => Some("1"),
        2 => Some("2"),
        3..=5 => Some("3-5"),
        6..=10 => Some("6-10"),
        _ => Some(">10"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub group: String,
    pub proved: usize,
    pub total: usize,
    /// Percentage rounded to one decimal; `None` for an empty group.
    pub rate: Option<f64>,
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn percent(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| round1(100.0 * part as f64 / whole as f64))
}

/// Proved/total per group. Length-bucket tables list every bucket, empty
/// ones included; other groupings list the groups present, sorted.
pub fn success_rate(records: &[RunRecord], group_by: GroupBy) -> Vec<RateRow> {
    if records.is_empty() {
        return Vec::new();
    }
    let mut groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in records {
        let key = match group_by {
            GroupBy::Split => r.split.clone(),
            GroupBy::SessionTag => r.session_tag.clone(),
            GroupBy::LengthBucket => length_bucket(r.ground_truth_length).unwrap_or("0").to_string(),
        };
        let entry = groups.entry(key).or_default();
        entry.0 += usize::from(r.proved());
        entry.1 += 1;
    }
    let row =
        |group: String, (proved, total): (usize, usize)| RateRow { group, proved, total, rate: percent(proved, total) };
    match group_by {
        GroupBy::LengthBucket => {
            let mut rows: Vec<RateRow> = Vec::new();
            if let Some(zero) = groups.remove("0") {
                rows.push(row("0".into(), zero));
            }
            for b in LENGTH_BUCKETS {
                rows.push(row(b.to_string(), groups.get(b).copied().unwrap_or((0, 0))));
            }
            rows
        }
        _ => groups.into_iter().map(|(g, c)| row(g, c)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub lines: usize,
    pub total_lines: usize,
    pub percent: f64,
}

/// Ground-truth lines of proved theorems over ground-truth lines of all.
pub fn coverage_lines(records: &[RunRecord]) -> Coverage {
    let total_lines: usize = records.iter().map(|r| r.ground_truth_length).sum();
    let lines: usize = records.iter().filter(|r| r.proved()).map(|r| r.ground_truth_length).sum();
    let percent = if total_lines == 0 { 0.0 } else { 100.0 * lines as f64 / total_lines as f64 };
    Coverage { lines, total_lines, percent }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionCurve {
    /// (sigma, p) with sigma strictly ascending.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("completion curve is empty")]
    Empty,
    #[error("sigma values must be strictly ascending")]
    NotAscending,
    #[error("sigma and p must lie in [0, 1]")]
    OutOfRange,
}

impl CompletionCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        let curve = CompletionCurve { points };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<(), CurveError> {
        if self.points.is_empty() {
            return Err(CurveError::Empty);
        }
        if self.points.iter().any(|&(s, p)| !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&p)) {
            return Err(CurveError::OutOfRange);
        }
        if self.points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(CurveError::NotAscending);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aes {
    /// `p1*s1 + sum (p_k - p_{k-1}) * s_k`.
    pub literal: f64,
    /// Same weights applied to the machine-completed share `1 - s_k`.
    pub saved: f64,
}

pub fn aes(curve: &CompletionCurve) -> Result<Aes, CurveError> {
    curve.validate()?;
    let mut literal = 0.0;
    let mut saved = 0.0;
    let mut prev_p = 0.0;
    for &(sigma, p) in &curve.points {
        let gain = p - prev_p;
        literal += gain * sigma;
        saved += gain * (1.0 - sigma);
        prev_p = p;
    }
    Ok(Aes { literal, saved })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub curve: CompletionCurve,
    /// Theorems whose prefix failed to replay; excluded from every point.
    pub failures: Vec<ReplayFailure>,
    /// completed[i][j]: theorem j finished at fraction i.
    pub completed: Vec<Vec<bool>>,
}

/// Number of ground-truth steps replayed for fraction `sigma` of an
/// `length`-step proof: `ceil(sigma * length)`.
pub fn prefix_len(sigma: f64, length: usize) -> usize {
    ((sigma * length as f64) - 1e-9).ceil().max(0.0) as usize
}

/// For each fraction, replays the first `ceil(sigma * L)` ground-truth steps
/// and runs the search from there. `p(sigma)` is the completed share.
pub fn completion_experiment(
    backend: &mut dyn ProverBackend,
    corpus: &[(TheoryHandle, String)],
    fractions: &[f64],
    generator: &dyn StepGenerator,
    config: &SearchConfig,
) -> Result<CompletionResult, SearchError> {
    if fractions.windows(2).any(|w| w[0] >= w[1]) || fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(SearchError::Config("fractions must be strictly ascending in [0, 1]".into()));
    }
    let step_timeout = Duration::from_millis(config.step_timeout_ms);
    let mut failures = Vec::new();
    let mut valid: Vec<usize> = Vec::new();
    let mut completed = vec![Vec::new(); fractions.len()];

    for (j, (handle, theorem)) in corpus.iter().enumerate() {
        let Some(proof) = handle.theory.entry(theorem).and_then(|e| e.proof.clone()) else {
            failures.push(ReplayFailure {
                theorem: theorem.clone(),
                step_index: 0,
                detail: "no ground-truth proof".into(),
            });
            continue;
        };
        let mut outcomes = Vec::with_capacity(fractions.len());
        let mut broken = None;
        for &sigma in fractions {
            let k = prefix_len(sigma, proof.len());
            let (session, mut state) = backend.start(handle, theorem)?;
            for (i, step) in proof[..k].iter().enumerate() {
                match backend.apply(&session, step, step_timeout)? {
                    StepResult::Success(next) => state = next,
                    StepResult::Failure { category, detail } => {
                        broken = Some(ReplayFailure {
                            theorem: theorem.clone(),
                            step_index: i,
                            detail: format!("{category}: {detail}"),
                        });
                        break;
                    }
                }
            }
            if broken.is_some() {
                backend.close(&session)?;
                break;
            }
            let outcome = search_from(backend, session, state, generator, config)?;
            if let SearchOutcome::Failed { tree, .. } = &outcome {
                if let Some(s) = &tree.session {
                    backend.close(s)?;
                }
            }
            outcomes.push(outcome.is_proved());
        }
        match broken {
            Some(f) => failures.push(f),
            None => {
                valid.push(j);
                for (i, done) in outcomes.into_iter().enumerate() {
                    completed[i].push(done);
                }
            }
        }
    }

    let n = valid.len();
    let points = fractions
        .iter()
        .zip(&completed)
        .map(|(&s, done)| (s, if n == 0 { 0.0 } else { done.iter().filter(|d| **d).count() as f64 / n as f64 }))
        .collect();
    Ok(CompletionResult { curve: CompletionCurve { points }, failures, completed })
}

/// `1 - lev(a, b) / max(|a|, |b|)` over characters; 1 for two empty texts.
pub fn sequence_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(a, b) as f64 / longest as f64
}

/// Tokens split on whitespace and punctuation (`_` stays inside identifiers).
pub fn tokenize(text: &str) -> BTreeSet<&str> {
    text.split(|c: char| c.is_whitespace() || (c.is_ascii_punctuation() && c != '_'))
        .filter(|t| !t.is_empty())
        .collect()
}

/// `|A ∩ B| / |A ∪ B|` over token sets; 1 for two empty texts.
pub fn jaccard_similarity(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokenize(a), tokenize(b));
    let union = ta.union(&tb).count();
    if union == 0 {
        return 1.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}
