use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;
use std::time::Duration;

use proptest::prelude::*;
use serde_json::json;

use stepwise::corpus::generate_corpus;
use stepwise::evaluation::{
    aes, completion_experiment, jaccard_similarity, prefix_len, sequence_similarity, CompletionCurve,
};
use stepwise::generator::{mock_generate, GeneratorConfig, MockGenerator};
use stepwise::protocol::{
    decode_request, decode_response, encode_request, encode_response, Command, Request, Response,
};
use stepwise::prover::{apply_step, hammer_moves, toy_hammer, HammerConfig, HammerResult};
use stepwise::revision::edit_distance;
use stepwise::search::{score_node, SearchConfig};
use stepwise::state::parse_state;
use stepwise::{parse_formula, FactContext, Formula, ProofState, ProverBackend, StepResult, Subgoal};

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        4 => prop::sample::select(vec!["p", "q", "r", "s"]).prop_map(Formula::atom),
        1 => Just(Formula::True),
        1 => Just(Formula::False),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)),
        ]
    })
}

fn subgoal() -> impl Strategy<Value = Subgoal> {
    (prop::collection::vec(formula(), 0..3), formula()).prop_map(|(h, g)| Subgoal::new(h, g))
}

fn empty_context() -> Arc<FactContext> {
    Arc::new(FactContext::new(Vec::<(String, Formula)>::new()))
}

/// Levenshtein on bytes, written out with a full table.
fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn formula_text_round_trips(f in formula()) {
        prop_assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn state_key_ignores_subgoal_and_hypothesis_order(sgs in prop::collection::vec(subgoal(), 1..4), seed in any::<u64>()) {
        let ctx = empty_context();
        let a = ProofState::new(sgs.clone(), ctx.clone());
        let mut shuffled: Vec<Subgoal> = sgs
            .iter()
            .map(|sg| {
                let mut h = sg.hypotheses().to_vec();
                h.reverse();
                Subgoal::new(h, sg.goal.clone())
            })
            .collect();
        let n = shuffled.len();
        shuffled.rotate_left((seed as usize) % n);
        let b = ProofState::new(shuffled, ctx);
        prop_assert_eq!(a.key(), b.key());
    }

    #[test]
    fn rendered_state_parses_back(sgs in prop::collection::vec(subgoal(), 0..4)) {
        let ctx = empty_context();
        let s = ProofState::new(sgs, ctx.clone());
        let back = parse_state(&s.render(), ctx).unwrap();
        prop_assert_eq!(back.subgoals, s.subgoals);
    }

    #[test]
    fn wire_messages_round_trip(id in any::<u64>(), timeout in any::<u64>(), text in "[a-z ]{0,12}", ok in any::<bool>()) {
        let req = Request {
            id,
            cmd: Command::Apply,
            session: Some(text.clone()),
            payload: json!({ "step": text }),
            timeout_ms: timeout,
        };
        prop_assert_eq!(decode_request(&encode_request(&req)).unwrap(), req);
        let resp = if ok {
            Response::success(id, json!({ "key": text }))
        } else {
            Response::failure(id, "tactic_failure", text)
        };
        prop_assert_eq!(decode_response(&encode_response(&resp)).unwrap(), resp);
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(a in "[a-z\\[\\] ]{0,16}", b in "[a-z\\[\\] ]{0,16}") {
        for sim in [sequence_similarity, jaccard_similarity] {
            let (x, y) = (sim(&a, &b), sim(&b, &a));
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert!((sim(&a, &a) - 1.0).abs() < 1e-12);
        }
        let longest = a.chars().count().max(b.chars().count());
        if longest > 0 {
            let expected = 1.0 - levenshtein(&a, &b) as f64 / longest as f64;
            prop_assert!((sequence_similarity(&a, &b) - expected).abs() < 1e-12);
        }
        prop_assert_eq!(edit_distance(&a, &b), levenshtein(&a, &b));
    }

    #[test]
    fn sibling_order_survives_uniform_shift(
        lps in prop::collection::vec(-20.0f64..0.0, 2..20),
        shift in -5.0f64..5.0,
        length in 1usize..12,
        alpha in prop::sample::select(vec![0.0, 0.5, 1.0, 2.0]),
    ) {
        let best = |s: f64| {
            let scores: Vec<f64> = lps.iter().map(|lp| score_node(lp + s, length, alpha)).collect();
            (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b })
        };
        prop_assert_eq!(best(0.0), best(shift));
    }

    #[test]
    fn effort_saving_matches_summation_by_parts(raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..6)) {
        let mut sigmas: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let mut ps: Vec<f64> = raw.iter().map(|r| r.1).collect();
        sigmas.sort_by(f64::total_cmp);
        sigmas.dedup();
        ps.sort_by(f64::total_cmp);
        ps.truncate(sigmas.len());
        let points: Vec<(f64, f64)> = sigmas.into_iter().zip(ps).collect();
        let got = aes(&CompletionCurve::new(points.clone()).unwrap()).unwrap();
        let n = points.len();
        let mut literal = points[n - 1].0 * points[n - 1].1;
        for k in 0..n - 1 {
            literal -= points[k].1 * (points[k + 1].0 - points[k].0);
        }
        prop_assert!((got.literal - literal).abs() < 1e-9);
        prop_assert!((got.literal + got.saved - points[n - 1].1).abs() < 1e-9);
    }

    #[test]
    fn prefix_never_exceeds_proof(sigma in 0.0f64..=1.0, length in 0usize..40) {
        let k = prefix_len(sigma, length);
        prop_assert!(k <= length);
        prop_assert!(k as f64 + 1e-6 >= sigma * length as f64);
    }

    #[test]
    fn mock_candidates_are_a_sorted_distribution(g in formula(), seed in any::<u64>()) {
        let ctx = Arc::new(FactContext::new([
            ("f1".to_string(), parse_formula("p -> q").unwrap()),
            ("f2".to_string(), parse_formula("q | r").unwrap()),
        ]));
        let state = ProofState::new(vec![Subgoal::goal(g)], ctx);
        let config = GeneratorConfig { seed, ..Default::default() };
        let out = mock_generate(&state, &config);
        prop_assert_eq!(&out, &mock_generate(&state, &config));
        let total: f64 = out.iter().map(|c| c.log_prob().exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(out.windows(2).all(|w| w[0].log_prob() >= w[1].log_prob()));
    }
}

/// Breadth-first search over the same move set the hammer uses.
fn bfs_proof_length(start: &ProofState, pool: &[String], max_depth: usize) -> Option<usize> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([(start.clone(), 0usize)]);
    while let Some((state, depth)) = queue.pop_front() {
        if state.is_complete() {
            return Some(depth);
        }
        if depth == max_depth || !seen.insert(state.render()) {
            continue;
        }
        for step in hammer_moves(&state, pool) {
            if let StepResult::Success(next) = apply_step(&state, &step, Duration::MAX) {
                queue.push_back((next, depth + 1));
            }
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hammer_agrees_with_breadth_first_search(goal in formula(), facts in prop::collection::vec(formula(), 0..3)) {
        let named: Vec<(String, Formula)> = facts.into_iter().enumerate().map(|(i, f)| (format!("f{i}"), f)).collect();
        let pool: Vec<String> = named.iter().map(|(n, _)| n.clone()).collect();
        let state = ProofState::new(vec![Subgoal::goal(goal)], Arc::new(FactContext::new(named)));
        let config = HammerConfig { max_depth: 3, premises: Some(pool.clone()), ..Default::default() };
        let found = toy_hammer(&state, &config);
        match (&found, bfs_proof_length(&state, &pool, 3)) {
            (HammerResult::Found { steps }, Some(_)) => {
                let mut s = state.clone();
                for step in steps {
                    s = apply_step(&s, step, Duration::MAX).state().cloned().expect("hammer steps apply");
                }
                prop_assert!(s.is_complete());
            }
            (HammerResult::NotFound, None) => {}
            (other, bfs) => prop_assert!(false, "hammer {:?} vs bfs {:?}", other, bfs),
        }
    }
}

#[test]
fn completion_curve_rises_with_the_prefix() {
    let corpus = generate_corpus(0, 40).unwrap();
    let mut prover = stepwise::prover::ToyProver::new();
    let items: Vec<_> = corpus.iter().map(|t| (prover.load_theory(&t.source).unwrap(), t.theorem.clone())).collect();
    let fractions = [0.0, 0.25, 0.5, 0.75, 1.0];
    let config = SearchConfig { max_iterations: 2, top_k: 1, ..Default::default() };
    for seed in [0, 1, 2] {
        let generator = MockGenerator::new(GeneratorConfig { seed, ..Default::default() });
        let result = completion_experiment(&mut prover, &items, &fractions, &generator, &config).unwrap();
        let ps: Vec<f64> = result.curve.points.iter().map(|p| p.1).collect();
        assert!(ps.windows(2).all(|w| w[0] <= w[1]), "seed {seed}: {ps:?}");
        assert_eq!(ps.last(), Some(&1.0));
    }
}
