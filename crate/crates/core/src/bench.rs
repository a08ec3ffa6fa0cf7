//! Three-arm comparison on the seeded corpus: a single `auto` step, the
//! hammer at the root, and the full search plus fallback pipeline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{replay_proof, ProverBackend};
use crate::corpus::{corrupt_step, BenchTheorem, Family};
use crate::engine::{prove_theorem, FoundBy};
use crate::evaluation::round1;
use crate::extraction::extract_pairs;
use crate::generator::{DatasetGenerator, GeneratorConfig, MockGenerator};
use crate::hammer::{mesh_rank, HammerFallbackConfig};
use crate::prover::HammerResult;
use crate::search::{SearchConfig, SearchError};
use crate::step::{parse_step, ProofStep, Tactic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub seed: u64,
    pub size: usize,
    pub search: SearchConfig,
    pub generator: GeneratorConfig,
    pub fallback: HammerFallbackConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 0,
            size: 200,
            search: SearchConfig::default(),
            generator: GeneratorConfig::default(),
            fallback: HammerFallbackConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Auto,
    HammerAtRoot,
    Full,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Auto, Arm::HammerAtRoot, Arm::Full];

    pub fn label(self) -> &'static str {
        match self {
            Arm::Auto => "auto",
            Arm::HammerAtRoot => "hammer at root",
            Arm::Full => "search + fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub index: usize,
    pub theorem: String,
    pub family: Family,
    pub ground_truth_length: usize,
    pub auto: bool,
    pub hammer: bool,
    pub full: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub found_by: Option<FoundBy>,
    /// The full pipeline's proof, when it found one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proof: Option<Vec<String>>,
    /// Every proof found by any arm closed all subgoals on a fresh replay.
    pub replayed: bool,
}

impl BenchRow {
    pub fn proved(&self, arm: Arm) -> bool {
        match arm {
            Arm::Auto => self.auto,
            Arm::HammerAtRoot => self.hammer,
            Arm::Full => self.full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub proved: usize,
    pub total: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub rows: Vec<BenchRow>,
    pub arms: Vec<ArmSummary>,
    /// Full-pipeline proofs that came from the hammer fallback.
    pub fallback_proved: usize,
    /// Theorems the root hammer missed and the full pipeline proved.
    pub beyond_root_hammer: Vec<String>,
    pub unreplayable: usize,
}

impl BenchReport {
    pub fn summary(&self, arm: Arm) -> &ArmSummary {
        self.arms.iter().find(|s| s.arm == arm).expect("every arm is summarized")
    }
}

/// Runs all three arms on every theorem. Wall time is deliberately left out
/// of the report so equal seeds give equal reports.
pub fn run_bench(
    backend: &mut dyn ProverBackend,
    corpus: &[BenchTheorem],
    config: &BenchConfig,
) -> Result<BenchReport, SearchError> {
    let generator = MockGenerator::new(GeneratorConfig { seed: config.seed, ..config.generator.clone() });
    let timeout = Duration::from_millis(config.search.step_timeout_ms);
    let mut rows = Vec::with_capacity(corpus.len());
    for item in corpus {
        let handle = backend.load_theory(&item.source)?;
        let mut replayed = true;

        let (session, _) = backend.start(&handle, &item.theorem)?;
        let auto_step = ProofStep::bare(Tactic::Auto);
        let auto = backend.apply(&session, &auto_step, timeout)?.state().is_some_and(|s| s.is_complete());
        backend.close(&session)?;
        if auto {
            replayed &= replay_proof(backend, &handle, &item.theorem, &[auto_step], timeout)?;
        }

        let (session, root) = backend.start(&handle, &item.theorem)?;
        let k = config.fallback.premise_limit.min(root.context.len());
        let premises = mesh_rank(&root, &root.context, k, config.fallback.mesh_weight);
        let hammer = match backend.hammer(&session, &config.fallback.hammer_config(premises))? {
            HammerResult::Found { steps } => {
                replayed &= replay_proof(backend, &handle, &item.theorem, &steps, timeout)?;
                true
            }
            _ => false,
        };
        backend.close(&session)?;

        let report = prove_theorem(backend, &handle, &item.theorem, &generator, &config.search, &config.fallback)?;
        if let Some(proof) = &report.proof {
            let steps: Vec<ProofStep> = proof.iter().filter_map(|s| parse_step(s).ok()).collect();
            replayed &= steps.len() == proof.len() && replay_proof(backend, &handle, &item.theorem, &steps, timeout)?;
        }

        rows.push(BenchRow {
            index: item.index,
            theorem: item.theorem.clone(),
            family: item.family,
            ground_truth_length: item.ground_truth().len(),
            auto,
            hammer,
            full: report.is_proved(),
            found_by: report.found_by,
            proof: report.proof,
            replayed,
        });
    }
    Ok(summarize(config.seed, rows))
}

pub fn summarize(seed: u64, rows: Vec<BenchRow>) -> BenchReport {
    let total = rows.len();
    let arms = Arm::ALL
        .iter()
        .map(|&arm| {
            let proved = rows.iter().filter(|r| r.proved(arm)).count();
            let percent = if total == 0 { 0.0 } else { round1(100.0 * proved as f64 / total as f64) };
            ArmSummary { arm, proved, total, percent }
        })
        .collect();
    BenchReport {
        seed,
        arms,
        fallback_proved: rows.iter().filter(|r| r.found_by == Some(FoundBy::Fallback)).count(),
        beyond_root_hammer: rows.iter().filter(|r| r.full && !r.hammer).map(|r| r.theorem.clone()).collect(),
        unreplayable: rows.iter().filter(|r| !r.replayed).count(),
        rows,
    }
}

/// Markdown tables: per-arm totals, then per-family counts.
pub fn render_markdown(report: &BenchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed {}, {} theorems\n", report.seed, report.rows.len());
    let _ = writeln!(out, "| arm | proved | total | success |");
    let _ = writeln!(out, "|---|---:|---:|---:|");
    for s in &report.arms {
        let _ = writeln!(out, "| {} | {} | {} | {:.1}% |", s.arm.label(), s.proved, s.total, s.percent);
    }
    let _ = writeln!(
        out,
        "\nproved by fallback: {}; beyond the root hammer: {}; failed replay: {}\n",
        report.fallback_proved,
        report.beyond_root_hammer.len(),
        report.unreplayable
    );

    let mut families: BTreeMap<Family, [usize; 4]> = BTreeMap::new();
    for r in &report.rows {
        let e = families.entry(r.family).or_default();
        e[0] += 1;
        e[1] += usize::from(r.auto);
        e[2] += usize::from(r.hammer);
        e[3] += usize::from(r.full);
    }
    let _ = writeln!(out, "| family | theorems | auto | hammer at root | search + fallback |");
    let _ = writeln!(out, "|---|---:|---:|---:|---:|");
    for (family, [n, a, h, f]) in families {
        let _ = writeln!(out, "| {family} | {n} | {a} | {h} | {f} |");
    }
    out
}

/// Runs the bench and reports the elapsed time separately from the
/// deterministic report.
pub fn timed_bench(
    backend: &mut dyn ProverBackend,
    corpus: &[BenchTheorem],
    config: &BenchConfig,
) -> Result<(BenchReport, Duration), SearchError> {
    let started = Instant::now();
    let report = run_bench(backend, corpus, config)?;
    Ok((report, started.elapsed()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionReport {
    /// Theorems the uncorrupted dataset generator proved, capped at the
    /// requested count.
    pub theorems: Vec<String>,
    pub with_revision: usize,
    pub without_revision: usize,
}

/// Search only, no fallback: prove with a generator that memorized the
/// ground truth, then again after misspelling one fact name in every
/// recorded step, with and without revision.
pub fn revision_experiment(
    backend: &mut dyn ProverBackend,
    corpus: &[BenchTheorem],
    count: usize,
    seed: u64,
    search: &SearchConfig,
) -> Result<RevisionReport, SearchError> {
    let timeout = Duration::from_millis(search.step_timeout_ms);
    let fallback = HammerFallbackConfig { enabled: false, ..Default::default() };
    let mut clean = Vec::new();
    let mut corrupted = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut handles = Vec::with_capacity(corpus.len());
    for item in corpus {
        let handle = backend.load_theory(&item.source)?;
        let pairs = extract_pairs(backend, &handle, timeout)?.pairs;
        let context = item.theory.context_for(&item.theorem).expect("theorem exists");
        for pair in &pairs {
            let mut bad = pair.clone();
            if let Ok(step) = parse_step(&pair.step) {
                bad.step = corrupt_step(&step, &context, &mut rng).text();
            }
            corrupted.push(bad);
        }
        clean.extend(pairs);
        handles.push(handle);
    }

    let memorized = DatasetGenerator::new(&clean);
    let mut solved = Vec::new();
    for (item, handle) in corpus.iter().zip(&handles) {
        if solved.len() == count {
            break;
        }
        if prove_theorem(backend, handle, &item.theorem, &memorized, search, &fallback)?.is_proved() {
            solved.push((item, handle));
        }
    }

    let misspelled = DatasetGenerator::new(&corrupted);
    let mut run = |revision_enabled: bool| -> Result<usize, SearchError> {
        let config = SearchConfig { revision_enabled, ..search.clone() };
        let mut proved = 0;
        for (item, handle) in &solved {
            proved += usize::from(
                prove_theorem(backend, handle, &item.theorem, &misspelled, &config, &fallback)?.is_proved(),
            );
        }
        Ok(proved)
    };
    let with_revision = run(true)?;
    let without_revision = run(false)?;
    Ok(RevisionReport {
        theorems: solved.iter().map(|(item, _)| item.theorem.clone()).collect(),
        with_revision,
        without_revision,
    })
}
