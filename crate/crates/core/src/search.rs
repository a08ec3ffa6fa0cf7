//! Top-k best-first proof search guided by a step generator.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ProverBackend, SessionId, Snapshot, TheoryHandle};
use crate::filtering::{filter_states, states_equivalent, FilterConfig, FilterStats, SeenSet};
use crate::generator::{GeneratorError, StepGenerator};
use crate::prover::DEFAULT_ATOM_LIMIT;
use crate::result::StepResult;
use crate::revision::{revise, FailedAttempt, RevisionConfig};
use crate::state::ProofState;
use crate::step::{Candidate, ProofStep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Length-normalization exponent. 0 ranks by raw path log-probability.
    pub alpha: f64,
    /// Nodes expanded per iteration.
    pub top_k: usize,
    pub candidates_per_state: usize,
    pub max_iterations: usize,
    pub node_budget: usize,
    pub time_limit_ms: u64,
    pub step_timeout_ms: u64,
    pub revision_enabled: bool,
    pub filtering_enabled: bool,
    /// Also drop children semantically equivalent to an existing node.
    pub equivalence_dedup: bool,
    pub atom_limit: usize,
    pub revision: RevisionConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alpha: 1.0,
            top_k: 5,
            candidates_per_state: 128,
            max_iterations: 64,
            node_budget: 4096,
            time_limit_ms: 120 * 60 * 1000,
            step_timeout_ms: 10_000,
            revision_enabled: true,
            filtering_enabled: true,
            equivalence_dedup: false,
            atom_limit: DEFAULT_ATOM_LIMIT,
            revision: RevisionConfig::default(),
        }
    }
}

/// Length-normalized path score `log P / L^alpha`; the root (L = 0) scores 0.
pub fn score_node(path_log_prob: f64, length: usize, alpha: f64) -> f64 {
    if length == 0 {
        0.0
    } else {
        path_log_prob / (length as f64).powf(alpha)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchNode {
    pub parent: Option<usize>,
    pub step: Option<Candidate>,
    pub path_log_prob: f64,
    pub length: usize,
    pub score: f64,
    pub explored: bool,
    pub key: String,
    #[serde(skip)]
    pub state: Option<ProofState>,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ranked {
    score: f64,
    index: usize,
}

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All nodes created by one search, in insertion order, plus the frontier.
#[derive(Debug, Clone, Default)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
    frontier: BinaryHeap<Ranked>,
    /// Session the snapshots belong to; stays open after a failed search.
    pub session: Option<SessionId>,
}

impl SearchTree {
    pub fn push(&mut self, node: SearchNode) -> usize {
        let index = self.nodes.len();
        self.frontier.push(Ranked { score: node.score, index });
        self.nodes.push(node);
        index
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn frontier_len(&self) -> usize {
        self.frontier.len()
    }

    /// Every node index, best score first, ties by insertion order.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.nodes.len()).collect();
        idx.sort_by(|&a, &b| self.nodes[b].score.total_cmp(&self.nodes[a].score).then(a.cmp(&b)));
        idx
    }
}

/// Pops the `k` best unexplored nodes and marks them explored.
pub fn select_top_k(tree: &mut SearchTree, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let Some(Ranked { index, .. }) = tree.frontier.pop() else {
            break;
        };
        tree.nodes[index].explored = true;
        out.push(index);
    }
    out
}

/// Steps from the root to `node`.
pub fn reconstruct_proof(tree: &SearchTree, node: usize) -> Vec<ProofStep> {
    let mut steps = Vec::new();
    let mut cur = Some(node);
    while let Some(i) = cur {
        let n = &tree.nodes[i];
        if let Some(c) = &n.step {
            steps.push(c.step.clone());
        }
        cur = n.parent;
    }
    steps.reverse();
    steps
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub iterations: usize,
    pub nodes_created: usize,
    pub expansions: usize,
    pub generator_calls: usize,
    pub steps_tried: usize,
    pub revisions_tried: usize,
    pub revisions_succeeded: usize,
    pub filter: FilterStats,
    pub budget_exhausted: bool,
    pub timed_out: bool,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Proved { steps: Vec<Candidate>, stats: SearchStats },
    Failed { tree: SearchTree, stats: SearchStats },
}

impl SearchOutcome {
    pub fn is_proved(&self) -> bool {
        matches!(self, SearchOutcome::Proved { .. })
    }

    pub fn stats(&self) -> &SearchStats {
        match self {
            SearchOutcome::Proved { stats, .. } | SearchOutcome::Failed { stats, .. } => stats,
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("bad search input: {0}")]
    Config(String),
}

/// Proves `theorem` from its initial state. On success the session is
/// closed; on failure it stays open in the returned tree.
pub fn best_first_search(
    backend: &mut dyn ProverBackend,
    theory: &TheoryHandle,
    theorem: &str,
    generator: &dyn StepGenerator,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let (session, root) = backend.start(theory, theorem)?;
    search_from(backend, session, root, generator, config)
}

/// Searches from the current state of an open session.
pub fn search_from(
    backend: &mut dyn ProverBackend,
    session: SessionId,
    root: ProofState,
    generator: &dyn StepGenerator,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let started = Instant::now();
    let deadline = started.checked_add(Duration::from_millis(config.time_limit_ms));
    let step_timeout = Duration::from_millis(config.step_timeout_ms);
    let mut stats = SearchStats::default();
    let mut seen = SeenSet::new();
    let filter = FilterConfig { dedup: config.filtering_enabled, counterexamples: config.filtering_enabled };

    if root.is_complete() {
        backend.close(&session)?;
        stats.nodes_created = 1;
        return Ok(SearchOutcome::Proved { steps: Vec::new(), stats });
    }

    let mut tree = SearchTree::default();
    crate::filtering::is_duplicate(&root, &mut seen);
    let root_snapshot = backend.clone_state(&session)?;
    tree.push(SearchNode {
        parent: None,
        step: None,
        path_log_prob: 0.0,
        length: 0,
        score: 0.0,
        explored: false,
        key: root.key(),
        state: Some(root),
        snapshot: root_snapshot,
    });
    stats.nodes_created = 1;

    let expired = || deadline.is_some_and(|d| Instant::now() >= d);

    'outer: while stats.iterations < config.max_iterations {
        if expired() {
            stats.timed_out = true;
            break;
        }
        let batch = select_top_k(&mut tree, config.top_k);
        if batch.is_empty() {
            break;
        }
        stats.iterations += 1;
        for node in batch {
            if expired() {
                stats.timed_out = true;
                break 'outer;
            }
            stats.expansions += 1;
            let state = tree.nodes[node].state.clone().expect("tree nodes carry states");
            let snapshot = tree.nodes[node].snapshot.clone();

            stats.generator_calls += 1;
            let generated = generator.generate(&state, config.candidates_per_state)?;
            let mut tried: HashSet<String> = HashSet::new();
            let mut successes: Vec<(ProofState, (Candidate, Snapshot))> = Vec::new();
            let mut failures: Vec<FailedAttempt> = Vec::new();

            for cand in generated {
                if !tried.insert(cand.step.text()) {
                    continue;
                }
                backend.restore(&session, &snapshot)?;
                stats.steps_tried += 1;
                match backend.apply(&session, &cand.step, step_timeout)? {
                    StepResult::Success(next) => {
                        if next.is_complete() {
                            let mut steps = path_candidates(&tree, node);
                            steps.push(cand);
                            return finish(backend, &session, steps, stats, started);
                        }
                        let snap = backend.clone_state(&session)?;
                        successes.push((next, (cand, snap)));
                    }
                    StepResult::Failure { category, .. } => failures.push(FailedAttempt {
                        state: state.clone(),
                        step: cand.step.clone(),
                        log_prob: cand.log_prob(),
                        category,
                    }),
                }
            }

            if config.revision_enabled && !failures.is_empty() {
                for cand in revise(&failures, &config.revision) {
                    if !tried.insert(cand.step.text()) {
                        continue;
                    }
                    backend.restore(&session, &snapshot)?;
                    stats.revisions_tried += 1;
                    if let StepResult::Success(next) = backend.apply(&session, &cand.step, step_timeout)? {
                        stats.revisions_succeeded += 1;
                        if next.is_complete() {
                            let mut steps = path_candidates(&tree, node);
                            steps.push(cand);
                            return finish(backend, &session, steps, stats, started);
                        }
                        let snap = backend.clone_state(&session)?;
                        successes.push((next, (cand, snap)));
                    }
                }
            }

            let atom_limit = config.atom_limit;
            let mut oracle = |_: &ProofState, payload: &(Candidate, Snapshot)| {
                backend.restore(&session, &payload.1)?;
                backend.counterexample(&session, atom_limit)
            };
            let (kept, fstats) = filter_states(successes, &mut seen, &mut oracle, &filter)?;
            stats.filter.add(&fstats);

            let parent = &tree.nodes[node];
            let (parent_lp, parent_len) = (parent.path_log_prob, parent.length);
            for (child, (cand, snap)) in kept {
                if config.equivalence_dedup
                    && tree.nodes.iter().any(|n| n.state.as_ref().is_some_and(|s| states_equivalent(s, &child)))
                {
                    stats.filter.duplicates_rejected += 1;
                    continue;
                }
                if stats.nodes_created >= config.node_budget {
                    stats.budget_exhausted = true;
                    break 'outer;
                }
                let path_log_prob = parent_lp + cand.log_prob();
                let length = parent_len + 1;
                tree.push(SearchNode {
                    parent: Some(node),
                    path_log_prob,
                    length,
                    score: score_node(path_log_prob, length, config.alpha),
                    explored: false,
                    key: child.key(),
                    state: Some(child),
                    snapshot: snap,
                    step: Some(cand),
                });
                stats.nodes_created += 1;
            }
        }
    }

    stats.wall_time_ms = started.elapsed().as_millis() as u64;
    tree.session = Some(session);
    Ok(SearchOutcome::Failed { tree, stats })
}

fn path_candidates(tree: &SearchTree, node: usize) -> Vec<Candidate> {
    let mut steps = Vec::new();
    let mut cur = Some(node);
    while let Some(i) = cur {
        if let Some(c) = &tree.nodes[i].step {
            steps.push(c.clone());
        }
        cur = tree.nodes[i].parent;
    }
    steps.reverse();
    steps
}

fn finish(
    backend: &mut dyn ProverBackend,
    session: &SessionId,
    steps: Vec<Candidate>,
    mut stats: SearchStats,
    started: Instant,
) -> Result<SearchOutcome, SearchError> {
    backend.close(session)?;
    stats.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(SearchOutcome::Proved { steps, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::replay_proof;
    use crate::generator::{GeneratorConfig, MockGenerator};
    use crate::prover::ToyProver;
    use crate::step::Origin;

    fn cand(text: &str, lp: f64) -> Candidate {
        Candidate::new(crate::step::parse_step(text).unwrap(), lp, Origin::Generated).unwrap()
    }

    fn node(parent: Option<usize>, score: f64) -> SearchNode {
        SearchNode {
            parent,
            step: parent.map(|_| cand("auto", score.min(0.0))),
            path_log_prob: score,
            length: usize::from(parent.is_some()),
            score,
            explored: false,
            key: String::new(),
            state: None,
            snapshot: Snapshot(String::new()),
        }
    }

    #[test]
    fn scores() {
        assert_eq!(score_node(0.0, 0, 1.0), 0.0);
        assert!((score_node(-2.4, 3, 1.0) + 0.8).abs() < 1e-12);
        assert!((score_node(-2.4, 3, 0.0) + 2.4).abs() < 1e-12);
        assert!((score_node(-1.0, 4, 0.5) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn top_k_takes_best_with_insertion_ties() {
        let mut tree = SearchTree::default();
        tree.push(node(None, -3.0));
        for s in [-0.1, -0.5, -0.1, -0.9] {
            tree.push(node(Some(0), s));
        }
        assert_eq!(select_top_k(&mut tree, 2), vec![1, 3]);
        assert!(tree.nodes[1].explored && tree.nodes[3].explored);
        assert_eq!(select_top_k(&mut tree, 5), vec![2, 4, 0]);
        assert!(select_top_k(&mut tree, 5).is_empty());
    }

    fn run(source: &str, theorem: &str, config: &SearchConfig) -> (SearchOutcome, ToyProver, TheoryHandle) {
        let mut prover = ToyProver::new();
        let handle = prover.load_theory(source).unwrap();
        let gen = MockGenerator::new(GeneratorConfig { seed: 1, ..Default::default() });
        let out = best_first_search(&mut prover, &handle, theorem, &gen, config).unwrap();
        (out, prover, handle)
    }

    const CHAIN: &str = "theory c\naxiom f1: p\naxiom f2: p -> q\naxiom f3: q -> r\ntheorem t: r\nend\n";

    #[test]
    fn proves_and_replays() {
        let (out, mut prover, handle) = run(CHAIN, "t", &SearchConfig::default());
        let SearchOutcome::Proved { steps, stats } = out else { panic!("not proved") };
        assert!(stats.nodes_created >= 1);
        let steps: Vec<ProofStep> = steps.into_iter().map(|c| c.step).collect();
        assert!(replay_proof(&mut prover, &handle, "t", &steps, Duration::from_secs(1)).unwrap());
    }

    #[test]
    fn false_goal_fails_with_nodes() {
        let (out, _, _) = run("theory f\ntheorem t: false\nend\n", "t", &SearchConfig::default());
        let SearchOutcome::Failed { stats, tree } = out else { panic!("proved false") };
        assert!(stats.nodes_created > 0);
        assert!(tree.session.is_some());
    }

    #[test]
    fn node_budget_bounds_the_tree() {
        let source = "theory b\naxiom d: a | b\naxiom e: c -> x\ntheorem t: x\nend\n";
        let config = SearchConfig { node_budget: 3, ..Default::default() };
        let (out, _, _) = run(source, "t", &config);
        let SearchOutcome::Failed { stats, tree } = out else { panic!("unexpected proof") };
        assert!(stats.nodes_created <= 3);
        assert_eq!(tree.len(), stats.nodes_created);
    }

    #[test]
    fn zero_time_limit_fails_fast() {
        let config = SearchConfig { time_limit_ms: 0, ..Default::default() };
        let (out, _, _) = run(CHAIN, "t", &config);
        assert!(matches!(out, SearchOutcome::Failed { stats, .. } if stats.timed_out));
    }

    struct Scripted(Vec<Candidate>);
    impl StepGenerator for Scripted {
        fn generate(&self, _: &ProofState, n: usize) -> Result<Vec<Candidate>, GeneratorError> {
            Ok(self.0.iter().take(n).cloned().collect())
        }
    }

    #[test]
    fn revision_recovers_a_typo() {
        let source = "theory r\naxiom valid_cap: p\ntheorem t: p\nend\n";
        let gen = Scripted(vec![cand("apply [valid_cpa]", -0.1)]);
        let mut prover = ToyProver::new();
        let handle = prover.load_theory(source).unwrap();
        let config = SearchConfig::default();
        let out = best_first_search(&mut prover, &handle, "t", &gen, &config).unwrap();
        let SearchOutcome::Proved { steps, stats } = out else { panic!("revision did not recover") };
        assert_eq!(steps[0].step.text(), "apply [valid_cap]");
        assert_eq!(steps[0].origin, Origin::PremiseRepair);
        assert_eq!(stats.revisions_succeeded, 1);

        let config = SearchConfig { revision_enabled: false, ..Default::default() };
        let out = best_first_search(&mut prover, &handle, "t", &gen, &config).unwrap();
        assert!(!out.is_proved());
    }

    #[test]
    fn alpha_changes_the_expansion_order() {
        // One long confident branch and one short unlikely branch. With
        // alpha = 0 raw log-probability favours the long branch's nodes less.
        let mut tree = SearchTree::default();
        tree.push(node(None, 0.0));
        select_top_k(&mut tree, 1);
        let mk = |lp: f64, len: usize, alpha: f64| SearchNode {
            path_log_prob: lp,
            length: len,
            score: score_node(lp, len, alpha),
            ..node(Some(0), lp)
        };
        for alpha in [0.0, 1.0] {
            let mut t = tree.clone();
            t.push(mk(-2.0, 4, alpha));
            t.push(mk(-1.0, 1, alpha));
            let first = select_top_k(&mut t, 1)[0];
            assert_eq!(first, if alpha == 0.0 { 2 } else { 1 });
        }
    }
}
