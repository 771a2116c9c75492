mod common;

use common::oracles::{self, comb_graph, comb_spine, dims, fixture, mlm_gradient_error, sap_gradient_error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sid_core::datasets::{Caption, CaptionStyle, DemoSample, DemonstrationSet, Goal, Provenance, Trajectory};
use sid_core::envmodel::shortest_path;
use sid_core::policy::{
    checkpoint_json, decision_points, hard_negative_weights, init_parameters, mlm_loss, mlm_mask, oracle_action,
    parse_checkpoint, sample_sap_step, sap_loss, score_candidates, score_features, train, trajectory_context,
    Action, AgentState, ForcingSchedule, MaskedCaption, PolicyDims, SamplingStrategy, StepKind, TrainingConfig,
    Weights, N_FEATURES,
};
use sid_core::rollout::{run_episode, EpisodeSpec, Outcome, RolloutMode};
use sid_core::vocab::Vocabulary;
use sid_core::{SidError, World};

#[test]
fn untrained_scorer_is_uniform() {
    let f = fixture(1);
    let p = init_parameters(3, dims(&f), &f.vocab);
    for s in f.visual.samples().iter().step_by(97) {
        let path = s.trajectory.indices(&f.graph).unwrap();
        let state = AgentState::new(&f.graph, path[0]);
        let m = 1 + state.frontier().len();
        let (loss, _) = sap_loss(&p, &s.goal, &state, &f.graph, Action::Goto(path[1])).unwrap();
        assert!((loss - (m as f64).ln()).abs() < 1e-12);
        let dist = score_candidates(&p, &s.goal, &state, &f.graph).unwrap();
        assert!((dist.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn untrained_mlm_head_is_uniform() {
    let f = fixture(1);
    let p = init_parameters(3, dims(&f), &f.vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = &f.language.samples()[0];
    let masked = mlm_mask(s.goal.caption.as_ref().unwrap(), 0.5, &mut rng).unwrap();
    let ctx = trajectory_context(&f.graph, &s.trajectory.indices(&f.graph).unwrap());
    let (loss, _) = mlm_loss(&p, &masked, &ctx).unwrap();
    assert!((loss - (f.vocab.len() as f64).ln()).abs() < 1e-12);
}

#[test]
fn sap_gradients_match_finite_differences() {
    for point in 0..10 {
        let e = sap_gradient_error(point);
        assert!(e < 1e-4, "point {point}: relative error {e}");
    }
}

#[test]
fn mlm_gradients_match_finite_differences() {
    for point in 0..10 {
        let e = mlm_gradient_error(point);
        assert!(e < 1e-4, "point {point}: relative error {e}");
    }
}

#[test]
fn single_viewpoint_graph_only_stops() {
    let g = common::graph("one", &[[0.0, 0.0, 0.0]], &[], 4, 1);
    let vocab = Vocabulary::default();
    let p = init_parameters(1, PolicyDims::new(g.feature_dim(), &vocab), &vocab);
    let state = AgentState::new(&g, 0);
    let dist = score_candidates(&p, &Goal::visual("v00", 2), &state, &g).unwrap();
    assert_eq!(dist.probs, vec![1.0]);
    assert!(matches!(
        sap_loss(&p, &Goal::visual("v00", 2), &state, &g, Action::Goto(0)),
        Err(SidError::IllegalTarget(_))
    ));
}

#[test]
fn softmax_is_permutation_equivariant() {
    let f = fixture(2);
    let p = oracles::random_point(5, dims(&f), &f.vocab);
    let rows: Vec<[f64; N_FEATURES]> = (0..6)
        .map(|i| {
            let x = i as f64;
            [if i == 0 { 1.0 } else { 0.0 }, 0.1 * x, 0.0, 0.2 * x, 0.5, 0.3]
        })
        .collect();
    let probs = score_features(&p, &rows);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let perm = [3, 0, 5, 1, 4, 2];
    let permuted: Vec<_> = perm.iter().map(|&i| rows[i]).collect();
    let pp = score_features(&p, &permuted);
    for (j, &i) in perm.iter().enumerate() {
        assert!((pp[j] - probs[i]).abs() < 1e-15);
    }
}

#[test]
fn sap_descends_on_a_small_fixture() {
    let f = fixture(3);
    let mut p = init_parameters(11, dims(&f), &f.vocab);
    let samples: Vec<(&DemoSample, AgentState, Action)> = f
        .visual
        .samples()
        .iter()
        .step_by(211)
        .take(5)
        .map(|s| {
            let path = s.trajectory.indices(&f.graph).unwrap();
            let (pos, a) = decision_points(&f.graph, &path)[1];
            (s, AgentState::from_path(&f.graph, &path[..=pos]), a)
        })
        .collect();
    assert_eq!(samples.len(), 5);
    let total = |p: &_| -> (f64, Weights) {
        let mut g = Weights::zeros(&dims(&f));
        let mut l = 0.0;
        for (s, state, a) in &samples {
            let (li, gi) = sap_loss(p, &s.goal, state, &f.graph, *a).unwrap();
            l += li;
            g.add_scaled(1.0, &gi);
        }
        (l / 5.0, g)
    };
    let mut prev = f64::INFINITY;
    for _ in 0..100 {
        let (l, g) = total(&p);
        assert!(l < prev, "loss went up: {l} after {prev}");
        prev = l;
        p.weights.add_scaled(-0.05 / 5.0, &g);
    }
    assert!(prev < total(&init_parameters(11, dims(&f), &f.vocab)).0);
}

#[test]
fn mlm_descends_on_ten_captions() {
    let f = fixture(4);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let items: Vec<(MaskedCaption, Vec<f64>)> = f
        .language
        .samples()
        .iter()
        .step_by(37)
        .take(10)
        .map(|s| {
            let m = mlm_mask(s.goal.caption.as_ref().unwrap(), 0.15, &mut rng).unwrap();
            (m, trajectory_context(&f.graph, &s.trajectory.indices(&f.graph).unwrap()))
        })
        .collect();
    let mut p = init_parameters(2, dims(&f), &f.vocab);
    let mut losses = Vec::new();
    for _ in 0..100 {
        let mut g = Weights::zeros(&dims(&f));
        let mut l = 0.0;
        for (m, c) in &items {
            let (li, gi) = mlm_loss(&p, m, c).unwrap();
            l += li;
            g.add_scaled(1.0, &gi);
        }
        losses.push(l / 10.0);
        p.weights.add_scaled(-0.1 / 10.0, &g);
    }
    assert!(losses.windows(2).all(|w| w[1] < w[0]));
    assert!(losses[99] < 0.5 * losses[0]);
}

#[test]
fn trained_scorer_prefers_the_viewpoint_matching_the_goal() {
    // star: centre v00, leaves v01, v02
    let pos = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let g = common::graph("star", &pos, &[(0, 1), (0, 2)], 4, 21);
    let vocab = Vocabulary::default();
    let d = PolicyDims::new(g.feature_dim(), &vocab).with_hidden(8);
    let mut p = init_parameters(4, d, &vocab);
    let state = AgentState::new(&g, 0);
    let data = [(Goal::visual("v01", 1), Action::Goto(1)), (Goal::visual("v02", 3), Action::Goto(2))];
    let mut loss = f64::INFINITY;
    for _ in 0..5000 {
        let mut grads = Weights::zeros(&d);
        loss = 0.0;
        for (goal, a) in &data {
            let (l, gr) = sap_loss(&p, goal, &state, &g, *a).unwrap();
            loss += l / 2.0;
            grads.add_scaled(0.5, &gr);
        }
        if loss < 0.1 {
            break;
        }
        p.weights.add_scaled(-0.2, &grads);
    }
    assert!(loss < 0.1);
    for (goal, a) in &data {
        let dist = score_candidates(&p, goal, &state, &g).unwrap();
        let best = dist.argmax();
        assert_eq!(dist.candidates[best].target.as_deref(), Some(g.id(match a {
            Action::Goto(n) => *n,
            Action::Stop => unreachable!(),
        })));
    }
}

#[test]
fn revised_sampling_frequencies() {
    let g = comb_graph();
    let path = comb_spine();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000;
    let mut on = 0;
    let mut hist = [0usize; 7];
    for _ in 0..n {
        let s = sample_sap_step(&path, &g, SamplingStrategy::Revised, &mut rng);
        match s.kind {
            StepKind::OnPath => on += 1,
            StepKind::HardNegative => {
                hist[s.decision] += 1;
                // the injected distractor is visited but the label stays on-path
                assert_eq!(s.target, decision_points(&g, &path)[s.decision].1);
                assert!(s.state.visited().len() == s.decision + 2);
            }
            k => panic!("unexpected step kind {k:?}"),
        }
    }
    assert!((on as f64 / n as f64 - 0.75).abs() < 0.01);
    let hn: usize = hist.iter().sum();
    let w = hard_negative_weights(7);
    for (c, w) in hist.iter().zip(w) {
        assert!((*c as f64 / hn as f64 - w).abs() < 0.02);
    }
}

#[test]
fn original_sampling_frequencies() {
    let g = comb_graph();
    let path = comb_spine();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        let s = sample_sap_step(&path, &g, SamplingStrategy::Original, &mut rng);
        match s.kind {
            StepKind::GoalStop => {
                assert_eq!(s.target, Action::Stop);
                counts[0] += 1
            }
            StepKind::OnPath => counts[1] += 1,
            StepKind::OffPath => {
                assert!(!path.contains(&s.state.current()));
                counts[2] += 1
            }
            k => panic!("unexpected step kind {k:?}"),
        }
    }
    for (c, want) in counts.iter().zip([0.2, 0.4, 0.4]) {
        assert!((*c as f64 / n as f64 - want).abs() < 0.01, "{counts:?}");
    }
}

#[test]
fn hard_negative_weights_truncate() {
    let w = hard_negative_weights(3);
    assert_eq!(w.len(), 3);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((w[0] - 927.0 / 1475.0).abs() < 1e-12);
    assert_eq!(hard_negative_weights(20).len(), 7);
}

#[test]
fn decision_points_skip_routing_hops() {
    let g = comb_graph();
    // 0 -> 7 (side) -> back through 0 -> 1 -> 2
    let path = [0, 7, 0, 1, 2];
    let d = decision_points(&g, &path);
    assert_eq!(d, vec![(0, Action::Goto(7)), (1, Action::Goto(1)), (3, Action::Goto(2)), (4, Action::Stop)]);
    assert_eq!(decision_points(&g, &[3]), vec![(0, Action::Stop)]);
}

#[test]
fn oracle_follows_the_shortest_path() {
    let f = fixture(6);
    for s in f.visual.samples().iter().step_by(53) {
        let path = s.trajectory.indices(&f.graph).unwrap();
        let target = *path.last().unwrap();
        let mut state = AgentState::new(&f.graph, path[0]);
        for w in path.windows(2) {
            assert_eq!(oracle_action(&f.graph, &state, target), Action::Goto(w[1]));
            state.advance(&f.graph, w);
        }
        assert_eq!(oracle_action(&f.graph, &state, target), Action::Stop);
    }
}

#[test]
fn mask_rate_and_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let long = Caption { tokens: vec!["lamp".to_string(); 100], style: CaptionStyle::Detail };
    let mut masked = 0usize;
    let draws = 10_000;
    for _ in 0..draws {
        masked += mlm_mask(&long, 0.15, &mut rng).unwrap().positions.len();
    }
    let rate = masked as f64 / (draws * 100) as f64;
    assert!((rate - 0.15).abs() < 0.005, "rate {rate}");

    let one = Caption { tokens: vec!["bed".into()], style: CaptionStyle::Detail };
    for _ in 0..100 {
        assert_eq!(mlm_mask(&one, 0.15, &mut rng).unwrap().positions, vec![0]);
    }
    let all = mlm_mask(&long, 1.0, &mut rng).unwrap();
    assert_eq!(all.positions.len(), 100);
    assert!(all.tokens.iter().all(|t| t == "[mask]"));
    let empty = Caption { tokens: vec![], style: CaptionStyle::Detail };
    assert!(mlm_mask(&empty, 0.15, &mut rng).is_err());
}

#[test]
fn mlm_loss_requires_a_mask() {
    let f = fixture(1);
    let p = init_parameters(3, dims(&f), &f.vocab);
    let m = MaskedCaption { tokens: vec!["bed".into()], positions: vec![], targets: vec![] };
    let ctx = vec![0.0; f.graph.feature_dim()];
    assert!(matches!(mlm_loss(&p, &m, &ctx), Err(SidError::EmptyInput(_))));
}

#[test]
fn init_is_deterministic_and_finite() {
    let f = fixture(1);
    let a = init_parameters(8, dims(&f), &f.vocab);
    assert_eq!(a, init_parameters(8, dims(&f), &f.vocab));
    assert_ne!(a, init_parameters(9, dims(&f), &f.vocab));
    a.validate().unwrap();
    assert!(a.weights.is_finite());
}

#[test]
fn checkpoints_round_trip() {
    let f = fixture(1);
    let p = oracles::random_point(8, dims(&f), &f.vocab);
    let text = checkpoint_json(&p, Some(serde_json::json!({"seed": 8})));
    assert_eq!(parse_checkpoint(&text).unwrap(), p);
    assert!(parse_checkpoint(&text.replace("\"version\":1", "\"version\":99")).is_err());
}

fn one_demo(f: &oracles::Fixture) -> DemonstrationSet {
    let s = f.visual.samples()[0].clone();
    DemonstrationSet::new(0, vec![s; 4]).unwrap()
}

fn small_config() -> TrainingConfig {
    TrainingConfig {
        pretrain_iterations: 200,
        finetune_iterations: 20,
        batch_size: 4,
        hidden: 8,
        ..Default::default()
    }
}

#[test]
fn overfits_a_single_demonstration() {
    let f = fixture(7);
    let demos = one_demo(&f);
    let cfg = TrainingConfig {
        pretrain_iterations: 1500,
        finetune_iterations: 300,
        forcing: ForcingSchedule { teacher: 1, student: 0 },
        ..small_config()
    };
    let out = train(init_parameters(1, dims(&f), &f.vocab), &f.world, &demos, &[], &cfg).unwrap();
    let s = &demos.samples()[0];
    let path = s.trajectory.indices(&f.graph).unwrap();
    for (pos, a) in decision_points(&f.graph, &path) {
        let state = AgentState::from_path(&f.graph, &path[..=pos]);
        let (loss, _) = sap_loss(&out.params, &s.goal, &state, &f.graph, a).unwrap();
        assert!(loss < 0.05, "decision at {pos}: loss {loss}");
    }
    // greedy decoding reproduces the demonstration
    let spec = EpisodeSpec { env_id: f.graph.env_id().into(), start: s.trajectory.start().into(), goal: s.goal.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ep = run_episode(&out.params, &f.graph, &spec, 15, RolloutMode::Greedy, &mut rng).unwrap();
    assert_eq!(ep.outcome, Outcome::Success);
    assert_eq!(ep.trajectory.viewpoint_ids, s.trajectory.viewpoint_ids);
}

#[test]
fn forcing_schedule_edge_cases() {
    let f = fixture(8);
    let demos = DemonstrationSet::new(0, f.visual.samples()[..40].to_vec()).unwrap();
    let teacher_only = TrainingConfig { forcing: ForcingSchedule { teacher: 1, student: 0 }, ..small_config() };
    let out = train(init_parameters(1, dims(&f), &f.vocab), &f.world, &demos, &[], &teacher_only).unwrap();
    assert_eq!(out.stats.oracle_calls, 0);
    assert!(out.stats.teacher_steps > 0);
    let student_only = TrainingConfig { forcing: ForcingSchedule { teacher: 0, student: 1 }, ..small_config() };
    let out = train(init_parameters(1, dims(&f), &f.vocab), &f.world, &demos, &[], &student_only).unwrap();
    assert_eq!(out.stats.teacher_steps, 0);
    assert!(out.stats.oracle_calls > 0);
    let mixed = TrainingConfig { forcing: ForcingSchedule { teacher: 3, student: 1 }, ..small_config() };
    let out = train(init_parameters(1, dims(&f), &f.vocab), &f.world, &demos, &[], &mixed).unwrap();
    assert_eq!(out.stats.teacher_iterations, 15);
    assert_eq!(out.stats.student_iterations, 5);
}

#[test]
fn training_is_deterministic_and_mixes_tasks() {
    let f = fixture(9);
    let demos = DemonstrationSet::new(0, f.language.samples()[..30].to_vec()).unwrap();
    let specs = EpisodeSpec::from_demonstrations(&demos)[..5].to_vec();
    let cfg = TrainingConfig { eval_every: 5, ..small_config() };
    let a = train(init_parameters(1, dims(&f), &f.vocab), &f.world, &demos, &specs, &cfg).unwrap();
    let b = train(init_parameters(1, dims(&f), &f.vocab), &f.world, &demos, &specs, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.log, b.log);
    // language goals: both proxy tasks, roughly equally often
    let mlm = a.stats.mlm_iterations as f64 / 200.0;
    assert!(a.stats.sap_iterations > 0 && (mlm - 0.5).abs() < 0.15, "{:?}", a.stats);
    assert!(a.best_val_sr.is_some());
    assert_eq!(a.log.iter().filter(|r| r.val_sr.is_some()).count(), 4);
}

#[test]
fn training_rejects_broken_demonstrations() {
    let f = fixture(10);
    let s = &f.visual.samples()[0];
    let mut ids = s.trajectory.viewpoint_ids.clone();
    ids.remove(1);
    let broken = DemoSample {
        goal: s.goal.clone(),
        trajectory: Trajectory { viewpoint_ids: ids, ..s.trajectory.clone() },
    };
    let demos = DemonstrationSet::new(0, vec![broken]).unwrap();
    let err = train(init_parameters(1, dims(&f), &f.vocab), &f.world, &demos, &[], &small_config()).unwrap_err();
    assert!(matches!(err, SidError::InvalidDemonstration(_)), "{err}");
    let empty = DemonstrationSet::empty(0);
    assert!(train(init_parameters(1, dims(&f), &f.vocab), &f.world, &empty, &[], &small_config()).is_err());
    let bad = TrainingConfig { mlm_mask_rate: 1.5, ..small_config() };
    assert!(train(init_parameters(1, dims(&f), &f.vocab), &f.world, &f.visual, &[], &bad).is_err());
}

#[test]
fn agent_state_frontier_is_recomputable() {
    let f = fixture(11);
    let s = &f.visual.samples()[5];
    let path = s.trajectory.indices(&f.graph).unwrap();
    let state = AgentState::from_path(&f.graph, &path);
    state.validate(&f.graph).unwrap();
    let mut expect: Vec<usize> = (0..f.graph.len())
        .filter(|&n| !state.is_visited(n) && f.graph.neighbors(n).iter().any(|&(m, _)| state.is_visited(m)))
        .collect();
    expect.sort();
    assert_eq!(state.frontier(), expect.as_slice());
    assert_eq!(state.current(), *path.last().unwrap());
    let sp = shortest_path(&f.graph, s.trajectory.start(), s.trajectory.terminal()).unwrap();
    assert_eq!(sp.viewpoint_ids, s.trajectory.viewpoint_ids);
    let _ = (World::default(), Provenance::Shortest);
}
