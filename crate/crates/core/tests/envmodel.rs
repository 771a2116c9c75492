mod common;

use std::f64::consts::PI;

use common::{all_simple_paths, brute_force_distance, random_graph, weight};
use sid_core::envmodel::{
    generate_environment, geodesic_distance, heading, parse_environment, serialize_environment, shortest_path,
    GeneratorParams, SplitTag,
};
use sid_core::SidError;

#[test]
fn shortest_path_matches_enumeration_on_small_graphs() {
    for seed in 0..60 {
        let g = random_graph(seed, 8);
        for s in 0..g.len() {
            for t in 0..g.len() {
                let tr = shortest_path(&g, g.id(s), g.id(t)).unwrap();
                let idx = tr.indices(&g).unwrap();
                let brute = brute_force_distance(&g, s, t);
                assert!((weight(&g, &idx) - brute).abs() <= 1e-9 * brute.max(1.0), "seed {seed} {s}->{t}");
                assert!((geodesic_distance(&g, g.id(s), g.id(t)).unwrap() - brute).abs() <= 1e-9 * brute.max(1.0));
            }
        }
    }
}

#[test]
fn ties_pick_the_lexicographically_smallest_sequence() {
    // unit 4-cycle a-b-c-d
    let pos = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
    let g = common::graph("cycle", &pos, &[(0, 1), (1, 2), (2, 3), (3, 0)], 4, 1);
    let p = shortest_path(&g, "v00", "v02").unwrap();
    assert_eq!(p.viewpoint_ids, ["v00", "v01", "v02"]);
    let p = shortest_path(&g, "v02", "v00").unwrap();
    assert_eq!(p.viewpoint_ids, ["v02", "v01", "v00"]);

    // Brute force: among the minimum-weight simple paths the returned one is smallest.
    let pos = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [2.0, 1.0, 0.0], [1.0, 2.0, 0.0]];
    let g = common::graph("grid", &pos, &[(0, 1), (0, 3), (1, 2), (3, 2), (2, 4), (2, 5), (1, 4), (3, 5)], 4, 2);
    for s in 0..g.len() {
        for t in 0..g.len() {
            let paths = all_simple_paths(&g, s, t);
            let best = paths.iter().map(|p| weight(&g, p)).fold(f64::INFINITY, f64::min);
            let lex = paths
                .iter()
                .filter(|p| (weight(&g, p) - best).abs() < 1e-9)
                .map(|p| p.iter().map(|&i| g.id(i).to_string()).collect::<Vec<_>>())
                .min()
                .unwrap();
            assert_eq!(shortest_path(&g, g.id(s), g.id(t)).unwrap().viewpoint_ids, lex);
        }
    }
}

#[test]
fn trivial_and_adjacent_distances() {
    let g = common::path_graph(3, 4);
    let p = shortest_path(&g, "v01", "v01").unwrap();
    assert_eq!(p.viewpoint_ids, ["v01"]);
    assert_eq!(p.length_m(&g).unwrap(), 0.0);
    assert_eq!(geodesic_distance(&g, "v00", "v00").unwrap(), 0.0);
    assert_eq!(geodesic_distance(&g, "v00", "v01").unwrap(), g.edge_weight(0, 1).unwrap());
    assert!(matches!(shortest_path(&g, "v00", "nope"), Err(SidError::UnknownViewpoint(_))));
    assert!(geodesic_distance(&g, "nope", "v00").is_err());
}

#[test]
fn geodesic_is_symmetric_and_positive_off_diagonal() {
    for seed in 100..120 {
        let g = random_graph(seed, 10);
        for a in 0..g.len() {
            for b in 0..g.len() {
                assert_eq!(g.geodesic(a, b), g.geodesic(b, a));
                assert_eq!(g.geodesic(a, b) == 0.0, a == b);
            }
        }
    }
}

#[test]
fn generated_graphs_satisfy_invariants() {
    let params = GeneratorParams::default();
    for seed in 1000..1010 {
        let g = generate_environment(seed, &params).unwrap();
        assert_eq!(g.len(), params.rooms * params.vps_per_room);
        for a in 0..g.len() {
            assert!(g.geodesic(0, a).is_finite());
            for &(b, w) in g.neighbors(a) {
                assert_ne!(a, b);
                assert_eq!(g.edge_weight(b, a), Some(w));
                let (p, q) = (g.viewpoint(a).position, g.viewpoint(b).position);
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                assert!((d - w).abs() <= 1e-9);
            }
            let vp = g.viewpoint(a);
            assert_eq!(vp.panorama.len(), params.k);
            for (i, v) in vp.panorama.iter().enumerate() {
                assert_eq!(v.heading, heading(i, params.k));
                assert!(v.heading >= 0.0 && v.heading < 2.0 * PI);
                let n = v.feature.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-6);
                assert!(!v.attributes.is_empty());
            }
        }
        let members: usize = g.rooms().iter().map(|r| r.member_viewpoints.len()).sum();
        assert_eq!(members, g.len());
    }
}

#[test]
fn generation_and_serialization_are_deterministic() {
    let params = GeneratorParams::default();
    let a = serialize_environment(&generate_environment(42, &params).unwrap());
    let b = serialize_environment(&generate_environment(42, &params).unwrap());
    assert_eq!(a, b);
    let c = serialize_environment(&generate_environment(43, &params).unwrap());
    assert_ne!(a, c);
}

#[test]
fn serialization_round_trips() {
    for seed in [0, 7, 1000] {
        let g = generate_environment(seed, &GeneratorParams::default()).unwrap();
        let text = serialize_environment(&g);
        let back = parse_environment(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(serialize_environment(&back), text);
    }
}

#[test]
fn truncated_document_is_a_located_parse_error() {
    let g = generate_environment(3, &GeneratorParams::default()).unwrap();
    let text = serialize_environment(&g);
    let lines: Vec<&str> = text.lines().collect();
    let cut = lines[..lines.len() / 2].join("\n");
    match parse_environment(&cut) {
        Err(SidError::Parse { line, .. }) => assert!(line > 1),
        other => panic!("expected a parse error, got {other:?}"),
    }
    match parse_environment("not an environment\n") {
        Err(SidError::Parse { line, .. }) => assert_eq!(line, 1),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn hand_written_fixture() {
    let text = "\
sid-environment 1
env_id tiny
split unseen
k 4
feature_dim 2
[rooms] 2
r0 bedroom a
r1 hallway b
[viewpoints] 2
a r0 0.0 0.0 0.0
view 0 bedroom,lamp 1.0 0.0
view 1 bedroom 0.0 1.0
view 2 bedroom -1.0 0.0
view 3 bedroom,red 0.0 -1.0
b r1 3.0 4.0 0.0
view 0 hallway 1.0 0.0
view 1 hallway 0.0 1.0
view 2 hallway -1.0 0.0
view 3 hallway 0.0 -1.0
[edges] 1
a b 5.0
[end]
";
    let g = parse_environment(text).unwrap();
    assert_eq!(g.env_id(), "tiny");
    assert_eq!(g.split(), SplitTag::Unseen);
    assert_eq!(g.len(), 2);
    assert_eq!(g.k(), 4);
    assert_eq!(g.edge_weight(0, 1), Some(5.0));
    assert_eq!(g.room(g.room_of(1)).room_type, "hallway");
    assert!(g.viewpoint(0).panorama[0].attributes.contains("lamp"));
    assert_eq!(g.viewpoint(0).panorama[3].heading, 1.5 * PI);
    assert_eq!(geodesic_distance(&g, "a", "b").unwrap(), 5.0);
}

#[test]
fn rejects_invalid_graphs() {
    let pos = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
    // disconnected
    let r = std::panic::catch_unwind(|| common::graph("x", &pos, &[(0, 1)], 4, 0));
    assert!(r.is_err());
    // odd panorama
    let p = GeneratorParams { k: 5, ..Default::default() };
    assert!(matches!(generate_environment(0, &p), Err(SidError::OddPanorama(5))));
}
