//! Command-line entry point.

use std::ffi::OsString;
use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::backend::{BackendError, ProverBackend};
use crate::bench::{render_markdown, revision_experiment, run_bench, BenchConfig};
use crate::config::{resolve, BackendChoice, EngineConfig, FlatConfig, GeneratorChoice};
use crate::corpus::generate_corpus;
use crate::engine::{prove_theorem, TheoremReport};
use crate::evaluation::{coverage_lines, success_rate, Coverage, GroupBy, RateRow, RunRecord};
use crate::extraction::{extract_pairs, read_dataset, write_dataset};
use crate::generator::{DatasetGenerator, LlmGenerator, MockGenerator, StepGenerator, ENDPOINT_ENV};
use crate::protocol::{ProtocolServer, RemoteBackend, RemoteOptions, ServerOptions};
use crate::prover::ToyProver;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ENGINE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "stepwise", version, about = "Best-first proof search over a miniature interactive prover")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search for proofs of one theorem or every theorem in a theory.
    Prove {
        #[arg(long)]
        theory: PathBuf,
        #[arg(long)]
        theorem: Option<String>,
        /// Directory for per-theorem JSON reports.
        #[arg(long, default_value = "reports")]
        out: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Write (state, step) pairs from recorded proofs as JSON lines.
    Extract {
        #[arg(long, required = true, num_args = 1..)]
        theory: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Success tables and line coverage over report files.
    Eval {
        /// Report files or directories of them.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one CSV per table into this directory.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the prover protocol server.
    Serve {
        #[arg(long, conflicts_with = "stdio")]
        port: Option<u16>,
        #[arg(long)]
        stdio: bool,
        /// Delay every `apply` answer by this many milliseconds.
        #[arg(long, default_value_t = 0)]
        inject_delay_ms: u64,
    },
    /// Seeded corpus, three arms, comparison tables.
    Bench {
        #[arg(long, default_value_t = 200)]
        size: usize,
        /// Directory for bench.md and bench.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run the misspelled-premise revision experiment on this many theorems.
        #[arg(long)]
        revision_theorems: Option<usize>,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

#[derive(Debug, Args, Default)]
struct EngineArgs {
    /// Flat TOML config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// mock, http, or dataset.
    #[arg(long)]
    generator: Option<String>,
    /// Pairs file for the dataset generator.
    #[arg(long)]
    dataset: Option<String>,
    /// `in_process`, or an endpoint (`host:port`, `tcp://host:port`, `exec:<cmd>`) for a remote prover.
    #[arg(long)]
    backend: Option<String>,
    /// HTTP endpoint of the step generator.
    #[arg(long)]
    endpoint: Option<String>,
    /// Nodes expanded per iteration.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Candidates requested per state.
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Per-theorem search limit in milliseconds.
    #[arg(long)]
    time_limit: Option<u64>,
    #[arg(long)]
    node_budget: Option<usize>,
    #[arg(long)]
    no_revision: bool,
    #[arg(long)]
    no_filtering: bool,
    /// Per-state hammer budget in milliseconds.
    #[arg(long)]
    hammer_timeout: Option<u64>,
    /// States handed to the hammer after a failed search.
    #[arg(long)]
    hammer_states: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
}

impl EngineArgs {
    fn flags(&self) -> FlatConfig {
        let (backend, backend_endpoint) = match self.backend.as_deref() {
            None => (None, None),
            Some("in_process") => (Some("in_process".to_string()), None),
            Some(endpoint) => (Some("remote".to_string()), Some(endpoint.to_string())),
        };
        FlatConfig {
            seed: self.seed,
            generator: self.generator.clone(),
            dataset: self.dataset.clone(),
            backend,
            backend_endpoint,
            endpoint: self.endpoint.clone(),
            top_k: self.k,
            alpha: self.alpha,
            candidates_per_state: self.candidates,
            n_candidates: self.candidates,
            max_iterations: self.max_iterations,
            time_limit_ms: self.time_limit,
            node_budget: self.node_budget,
            revision_enabled: self.no_revision.then_some(false),
            filtering_enabled: self.no_filtering.then_some(false),
            per_state_timeout_ms: self.hammer_timeout,
            m_states: self.hammer_states,
            jobs: self.jobs,
            ..FlatConfig::default()
        }
    }

    fn resolve(&self) -> Result<EngineConfig, String> {
        let file = match &self.config {
            Some(path) => Some(FlatConfig::load(path).map_err(|e| e.to_string())?),
            None => None,
        };
        let mut config = resolve(file.as_ref(), &self.flags()).map_err(|e| e.to_string())?;
        if config.generator.endpoint.is_none() {
            config.generator.endpoint = std::env::var(ENDPOINT_ENV).ok();
        }
        if config.jobs == 0 {
            return Err("--jobs must be at least 1".into());
        }
        Ok(config)
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
        Err(Failure::Engine(message)) => {
            eprintln!("error: {message}");
            EXIT_ENGINE
        }
    }
}

enum Failure {
    Usage(String),
    Engine(String),
}

fn engine<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Engine(e.to_string())
}

fn run(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Prove { theory, theorem, out, engine: args } => {
            let config = args.resolve().map_err(Failure::Usage)?;
            prove(&theory, theorem.as_deref(), &out, &config)
        }
        Command::Extract { theory, out, engine: args } => {
            let config = args.resolve().map_err(Failure::Usage)?;
            let mut backend = make_backend(&config).map_err(engine)?;
            let timeout = Duration::from_millis(config.search.step_timeout_ms);
            let mut pairs = Vec::new();
            for path in &theory {
                let source = read(path)?;
                let handle = backend.load_theory(&source).map_err(engine)?;
                let extraction = extract_pairs(backend.as_mut(), &handle, timeout).map_err(engine)?;
                for f in &extraction.failures {
                    eprintln!("{}: {} failed at step {}: {}", path.display(), f.theorem, f.step_index, f.detail);
                }
                pairs.extend(extraction.pairs);
            }
            let n = write_dataset(&pairs, &out).map_err(engine)?;
            println!("{n} pairs written to {}", out.display());
            Ok(EXIT_OK)
        }
        Command::Eval { reports, split, out, csv } => evaluate(&reports, &split, out.as_deref(), csv.as_deref()),
        Command::Serve { port, stdio, inject_delay_ms } => {
            let options = ServerOptions { inject_delay_ms, ..ServerOptions::from_env() };
            match (port, stdio) {
                (_, true) => {
                    let stdin = std::io::stdin();
                    ProtocolServer::new(options).serve(stdin.lock(), std::io::stdout()).map_err(engine)?;
                }
                (Some(port), false) => {
                    let listener = TcpListener::bind(("127.0.0.1", port)).map_err(engine)?;
                    eprintln!("listening on {}", listener.local_addr().map_err(engine)?);
                    for stream in listener.incoming() {
                        let stream = stream.map_err(engine)?;
                        let reader = BufReader::new(stream.try_clone().map_err(engine)?);
                        let options = options.clone();
                        std::thread::spawn(move || {
                            let _ = ProtocolServer::new(options).serve(reader, stream);
                        });
                    }
                }
                (None, false) => return Err(Failure::Usage("serve needs --port N or --stdio".into())),
            }
            Ok(EXIT_OK)
        }
        Command::Bench { size, out, revision_theorems, engine: args } => {
            let config = args.resolve().map_err(Failure::Usage)?;
            let seed = config.generator.seed;
            let corpus = generate_corpus(seed, size).map_err(engine)?;
            let bench = BenchConfig {
                seed,
                size,
                search: config.search.clone(),
                generator: config.generator.clone(),
                fallback: config.fallback.clone(),
            };
            let mut backend = make_backend(&config).map_err(engine)?;
            let report = run_bench(backend.as_mut(), &corpus, &bench).map_err(engine)?;
            let mut table = render_markdown(&report);
            if let Some(count) = revision_theorems {
                let r = revision_experiment(backend.as_mut(), &corpus, count, seed, &config.search).map_err(engine)?;
                table.push_str(&format!(
                    "\nmisspelled premises, {} theorems: {} proved with revision, {} without\n",
                    r.theorems.len(),
                    r.with_revision,
                    r.without_revision
                ));
            }
            print!("{table}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(engine)?;
                write_atomic(&dir.join("bench.md"), table.as_bytes())?;
                write_atomic(&dir.join("bench.json"), &to_json(&report)?)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(engine)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Write to a sibling temporary file, then rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let tmp = path.with_extension("tmp");
    let mut file = std::fs::File::create(&tmp).map_err(engine)?;
    file.write_all(bytes).map_err(engine)?;
    file.sync_all().map_err(engine)?;
    std::fs::rename(&tmp, path).map_err(engine)
}

fn make_backend(config: &EngineConfig) -> Result<Box<dyn ProverBackend>, BackendError> {
    Ok(match &config.backend {
        BackendChoice::InProcess => Box::new(ToyProver::new()),
        BackendChoice::Remote(endpoint) => Box::new(RemoteBackend::connect(endpoint, RemoteOptions::default())?),
    })
}

fn make_generator(config: &EngineConfig) -> Result<Box<dyn StepGenerator>, Failure> {
    Ok(match &config.generator_kind {
        GeneratorChoice::Mock => Box::new(MockGenerator::new(config.generator.clone())),
        GeneratorChoice::Http => {
            let endpoint = config
                .generator
                .endpoint
                .clone()
                .ok_or_else(|| Failure::Usage(format!("http generator needs --endpoint or {ENDPOINT_ENV}")))?;
            Box::new(LlmGenerator::new(endpoint, config.generator.clone()).map_err(|e| Failure::Usage(e.to_string()))?)
        }
        GeneratorChoice::Dataset(path) => {
            let pairs = read_dataset(Path::new(path)).map_err(|e| Failure::Usage(e.to_string()))?;
            Box::new(DatasetGenerator::new(&pairs))
        }
    })
}

fn prove(theory: &Path, theorem: Option<&str>, out: &Path, config: &EngineConfig) -> Result<i32, Failure> {
    let source = read(theory)?;
    let parsed =
        crate::theory::load_theory(&source).map_err(|e| Failure::Usage(format!("{}: {e}", theory.display())))?;
    let targets: Vec<String> = match theorem {
        Some(t) => {
            if parsed.provable().all(|e| e.id != t) {
                return Err(Failure::Usage(format!("--theorem {t}: no such lemma or theorem")));
            }
            vec![t.to_string()]
        }
        None => parsed.theorems().map(|e| e.id.clone()).collect(),
    };
    std::fs::create_dir_all(out).map_err(engine)?;

    let next = AtomicUsize::new(0);
    let errors = Mutex::new(Vec::new());
    let worker = || -> Result<(), Failure> {
        let mut backend = make_backend(config).map_err(engine)?;
        let generator = make_generator(config)?;
        let handle = backend.load_theory(&source).map_err(engine)?;
        loop {
            let i = next.fetch_add(1, Ordering::SeqCst);
            let Some(name) = targets.get(i) else {
                return Ok(());
            };
            match prove_theorem(backend.as_mut(), &handle, name, generator.as_ref(), &config.search, &config.fallback) {
                Ok(report) => {
                    println!("{}: {:?}", name, report.outcome);
                    let path = out.join(format!("{}.{}.json", parsed.name, name));
                    write_atomic(&path, &to_json(&report)?)?;
                }
                Err(e) => errors.lock().expect("lock").push(format!("{name}: {e}")),
            }
        }
    };
    let results: Vec<Result<(), Failure>> = std::thread::scope(|scope| {
        let workers: Vec<_> = (0..config.jobs.min(targets.len()).max(1)).map(|_| scope.spawn(worker)).collect();
        workers.into_iter().map(|w| w.join().expect("worker panicked")).collect()
    });
    for r in results {
        r?;
    }
    let errors = errors.into_inner().expect("lock");
    for e in &errors {
        eprintln!("error: {e}");
    }
    Ok(if errors.is_empty() { EXIT_OK } else { EXIT_ENGINE })
}

#[derive(Debug, Serialize)]
struct EvalReport {
    by_split: Vec<RateRow>,
    by_length: Vec<RateRow>,
    by_session: Vec<RateRow>,
    coverage: Coverage,
}

fn report_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input).map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn evaluate(inputs: &[PathBuf], split: &str, out: Option<&Path>, csv: Option<&Path>) -> Result<i32, Failure> {
    let mut records = Vec::new();
    for path in report_files(inputs)? {
        let text = read(&path)?;
        let report: TheoremReport =
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        records.push(RunRecord::from_report(&report, split));
    }
    let report = EvalReport {
        by_split: success_rate(&records, GroupBy::Split),
        by_length: success_rate(&records, GroupBy::LengthBucket),
        by_session: success_rate(&records, GroupBy::SessionTag),
        coverage: coverage_lines(&records),
    };
    let json = to_json(&report)?;
    match out {
        Some(path) => write_atomic(path, &json)?,
        None => std::io::stdout().write_all(&json).map_err(engine)?,
    }
    if let Some(dir) = csv {
        std::fs::create_dir_all(dir).map_err(engine)?;
        for (name, rows) in
            [("split", &report.by_split), ("length", &report.by_length), ("session", &report.by_session)]
        {
            let mut text = String::from("group,proved,total,rate\n");
            for r in rows {
                let rate = r.rate.map(|x| format!("{x:.1}")).unwrap_or_default();
                text.push_str(&format!("{},{},{},{rate}\n", r.group, r.proved, r.total));
            }
            write_atomic(&dir.join(format!("{name}.csv")), text.as_bytes())?;
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    const THEORY: &str = "theory demo
axiom f1: p
axiom f2: p -> q
axiom f3: q -> r
theorem t1: r
  proof
    apply [f3]
    apply [f2]
    assumption
  qed
theorem t2: p & q
end
";

    fn run_args(args: &[&str]) -> i32 {
        run_cli(std::iter::once("stepwise").chain(args.iter().copied()))
    }

    #[test]
    fn prove_writes_a_report() {
        let dir = tempfile::tempdir().unwrap();
        let theory = dir.path().join("demo.thy");
        std::fs::write(&theory, THEORY).unwrap();
        let out = dir.path().join("reports");
        let code = run_args(&[
            "prove",
            "--theory",
            theory.to_str().unwrap(),
            "--theorem",
            "t1",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        let text = std::fs::read_to_string(out.join("demo.t1.json")).unwrap();
        let report: TheoremReport = serde_json::from_str(&text).unwrap();
        assert!(report.is_proved());
    }

    #[test]
    fn prove_all_with_jobs_then_eval() {
        let dir = tempfile::tempdir().unwrap();
        let theory = dir.path().join("demo.thy");
        std::fs::write(&theory, THEORY).unwrap();
        let out = dir.path().join("reports");
        let code =
            run_args(&["prove", "--theory", theory.to_str().unwrap(), "--jobs", "2", "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        assert!(out.join("demo.t2.json").exists());
        let eval = dir.path().join("eval.json");
        let csv = dir.path().join("csv");
        let code =
            run_args(&["eval", out.to_str().unwrap(), "--out", eval.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(eval).unwrap()).unwrap();
        assert_eq!(v["by_split"][0]["total"], 2);
        assert_eq!(v["coverage"]["total_lines"], 3);
        assert!(csv.join("length.csv").exists());
    }

    #[test]
    fn extract_writes_one_line_per_step() {
        let dir = tempfile::tempdir().unwrap();
        let theory = dir.path().join("demo.thy");
        std::fs::write(&theory, THEORY).unwrap();
        let out = dir.path().join("pairs.jsonl");
        assert_eq!(
            run_args(&["extract", "--theory", theory.to_str().unwrap(), "--out", out.to_str().unwrap()]),
            EXIT_OK
        );
        assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 3);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["prove", "--bogus"]), EXIT_USAGE);
        assert_eq!(run_args(&["frobnicate"]), EXIT_USAGE);
        assert_eq!(run_args(&["serve"]), EXIT_USAGE);
        assert_eq!(run_args(&["prove", "--theory", "/nonexistent.thy"]), EXIT_USAGE);
        assert_eq!(run_args(&["bench", "--jobs", "0", "--size", "1"]), EXIT_USAGE);
    }

    #[test]
    fn engine_errors_exit_1() {
        let dir = tempfile::tempdir().unwrap();
        let theory = dir.path().join("demo.thy");
        std::fs::write(&theory, THEORY).unwrap();
        // Nothing listens on port 9 here; the remote backend cannot connect.
        let code = run_args(&[
            "prove",
            "--theory",
            theory.to_str().unwrap(),
            "--backend",
            "127.0.0.1:9",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_ENGINE);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(&cfg, "top_k = 3\nalpha = 0.5\n").unwrap();
        let args = EngineArgs { config: Some(cfg), k: Some(9), ..Default::default() };
        let c = args.resolve().unwrap();
        assert_eq!(c.search.top_k, 9);
        assert_eq!(c.search.alpha, 0.5);
        assert_eq!(c.search.max_iterations, EngineConfig::default().search.max_iterations);
    }
}
