mod common;

use common::doubles::Uniform;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sid_core::datasets::{build_base_dataset, DemoSample, Goal, Provenance, Trajectory};
use sid_core::envmodel::{generate_environment, shortest_path, GeneratorParams};
use sid_core::eval::{
    aggregate, compare_arms, compare_sources, episode_csv, read_episode_csv, room_stats, score_episode, score_episodes,
    svg_line_chart, trajectory_rooms, ArmResult, DemoSource, EpisodeResult, MetricsReport, PlotSeries,
};
use sid_core::rollout::{run_episode, run_episodes, EpisodeSpec, RolloutMode, ShortestPathOracle};
use sid_core::{SidError, World};

fn result(success: bool, tl: f64, sp: f64) -> EpisodeResult {
    EpisodeResult {
        success,
        oracle_success: success,
        trajectory_length_m: tl,
        shortest_length_m: sp,
        nav_error_m: if success { 0.0 } else { 1.0 },
        viewpoint_count: 3,
    }
}

#[test]
fn spl_arithmetic() {
    assert_eq!(result(true, 4.0, 4.0).spl(), 1.0);
    assert_eq!(result(true, 8.0, 4.0).spl(), 0.5);
    assert_eq!(result(false, 4.0, 4.0).spl(), 0.0);
    assert_eq!(result(true, 0.0, 0.0).spl(), 1.0);
    // independent recomputation: l / max(l, p)
    for (tl, sp) in [(3.0, 2.0), (7.5, 7.5), (10.0, 1.0)] {
        assert_eq!(result(true, tl, sp).spl(), sp / f64::max(sp, tl));
    }
}

#[test]
fn aggregate_examples() {
    assert!(matches!(aggregate(&[], "x"), Err(SidError::EmptyInput(_))));
    let r = aggregate(&[result(true, 8.0, 4.0), result(false, 3.0, 3.0)], "x").unwrap();
    assert_eq!((r.sr, r.spl), (0.5, 0.25));
    let all = aggregate(&[result(true, 2.0, 2.0), result(true, 5.0, 5.0)], "x").unwrap();
    assert_eq!((all.sr, all.osr, all.spl), (1.0, 1.0, 1.0));
}

fn world() -> World {
    World::new([generate_environment(1000, &GeneratorParams::default()).unwrap()])
}

#[test]
fn scored_episodes() {
    let w = world();
    let g = w.get("env-1000").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let spec = EpisodeSpec { env_id: g.env_id().into(), start: g.id(0).into(), goal: Goal::visual(g.id(20), 0) };
    let ep = run_episode(&ShortestPathOracle, g, &spec, 15, RolloutMode::Greedy, &mut rng).unwrap();
    let r = score_episode(&ep, g).unwrap();
    assert!(r.success && r.oracle_success);
    assert_eq!(r.spl(), 1.0);
    assert_eq!(r.nav_error_m, 0.0);
    let sp = shortest_path(g, g.id(0), g.id(20)).unwrap();
    assert_eq!(r.viewpoint_count, sp.len());

    // a failure stops short
    let mut short = ep.clone();
    short.trajectory.viewpoint_ids.pop();
    short.outcome = short.recompute_outcome();
    let r = score_episode(&short, g).unwrap();
    assert!(!r.success);
    assert_eq!(r.spl(), 0.0);
    assert!(r.nav_error_m > 0.0);
}

#[test]
fn metric_invariants_on_random_rollouts() {
    let w = world();
    let graphs: Vec<_> = w.graphs().collect();
    let d0 = build_base_dataset(&graphs, 5, 7).unwrap();
    let specs: Vec<EpisodeSpec> = EpisodeSpec::from_demonstrations(&d0).into_iter().step_by(7).collect();
    let eps = run_episodes(&Uniform, &w, &specs, 15, RolloutMode::Sampled, 4).unwrap();
    let report = score_episodes(&eps, &w, "unseen").unwrap();
    assert!(report.spl <= report.sr && report.sr <= report.osr);
    let g = w.get("env-1000").unwrap();
    for (e, r) in eps.iter().zip(&report.episodes) {
        let path = e.trajectory.indices(g).unwrap();
        assert_eq!(r.nav_error_m == 0.0, e.trajectory.terminal() == e.goal.target_viewpoint);
        if r.success {
            assert_eq!(r.nav_error_m, 0.0);
            assert!(r.oracle_success);
            assert!(r.shortest_length_m <= r.trajectory_length_m + 1e-9);
        }
        assert!(r.trajectory_length_m + 1e-9 >= g.geodesic(path[0], *path.last().unwrap()));
    }
    // bit-exact recomputation from the per-episode table
    let back = read_episode_csv(&episode_csv(&report)).unwrap();
    let again = aggregate(&back, "unseen").unwrap();
    assert_eq!(again, report);
    // and from the rollouts themselves
    assert_eq!(score_episodes(&eps, &w, "unseen").unwrap(), report);
}

#[test]
fn target_only_trajectory_counts_one_room() {
    for seed in [1000, 1001, 1002] {
        let g = generate_environment(seed, &GeneratorParams::default()).unwrap();
        let w = World::new([g.clone()]);
        let samples: Vec<DemoSample> = (0..g.len())
            .map(|v| DemoSample {
                goal: Goal::visual(g.id(v), 0),
                trajectory: Trajectory::from_indices(&g, &[v], Provenance::Shortest, 0),
            })
            .collect();
        let s = room_stats(&samples, &w).unwrap();
        assert_eq!((s.rooms, s.room_types, s.target_type_rooms), (1.0, 1.0, 1.0));
    }
    assert!(room_stats(&[], &world()).is_err());
}

#[test]
fn room_counts_on_a_two_room_fixture() {
    // rooms: r0 (bedroom) = {0,1}, r1 (hallway) = {2}, r2 (bedroom) = {3}
    let pos = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
    let g = common::graph_with_rooms("rooms", &pos, &[0, 0, 1, 2], &["bedroom", "hallway", "bedroom"], &[(0, 1), (1, 2), (2, 3)], 4, 1);
    let t = Trajectory::from_indices(&g, &[0, 1, 2, 3], Provenance::AgentRollout, 1);
    assert_eq!(trajectory_rooms(&t, "v03", &g).unwrap(), (3, 2, 2));
    assert_eq!(trajectory_rooms(&t, "v02", &g).unwrap(), (3, 2, 1));
}

fn report(sr: f64) -> MetricsReport {
    aggregate(&[result(sr >= 0.5, 1.0, 1.0), result(false, 1.0, 1.0)], "unseen").unwrap()
}

#[test]
fn paired_comparisons() {
    let arm = |label: &str, seeds: Vec<u64>| ArmResult { label: label.into(), reports: seeds.iter().map(|_| report(0.5)).collect(), seeds };
    let rows = compare_sources(&[
        (DemoSource::Shortest, arm("a", vec![0, 1, 2])),
        (DemoSource::RandomWalk, arm("b", vec![0, 1, 2])),
        (DemoSource::Agent, arm("c", vec![0, 1, 2])),
    ])
    .unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2].label, "agent");
    assert_eq!(rows[0].sr, 0.5);
    assert!(matches!(
        compare_arms(&[arm("a", vec![0, 1, 2]), arm("b", vec![0, 1, 3])]),
        Err(SidError::InvalidConfig(_))
    ));
    assert!(compare_sources(&[(DemoSource::Shortest, arm("a", vec![0]))]).is_err());
}

#[test]
fn svg_chart_has_one_polyline_per_series() {
    let svg = svg_line_chart(
        "SR <per round>",
        &["1".into(), "2".into(), "3".into()],
        &[
            PlotSeries { name: "SR".into(), values: vec![0.5, 0.52, 0.55] },
            PlotSeries { name: "SPL".into(), values: vec![0.4, 0.41, 0.45] },
        ],
    );
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("SR &lt;per round&gt;"));
}
