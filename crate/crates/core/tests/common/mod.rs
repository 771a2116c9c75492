#![allow(dead_code)]

pub mod doubles;
pub mod oracles;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sid_core::envmodel::{heading, EnvironmentGraph, Room, SplitTag, ViewObservation, Viewpoint};

pub const K: usize = 4;
pub const DIM: usize = 8;

pub fn vid(i: usize) -> String {
    format!("v{i:02}")
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Graph with random unit view features. `room_of[i]` names the room of node i;
/// room `r` has type `room_types[r]`.
pub fn graph_with_rooms(
    env_id: &str,
    positions: &[[f64; 3]],
    room_of: &[usize],
    room_types: &[&str],
    edges: &[(usize, usize)],
    k: usize,
    seed: u64,
) -> EnvironmentGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let viewpoints: Vec<Viewpoint> = positions
        .iter()
        .enumerate()
        .map(|(i, p)| Viewpoint {
            id: vid(i),
            position: *p,
            room_id: format!("r{}", room_of[i]),
            panorama: (0..k)
                .map(|v| ViewObservation {
                    feature: unit(&mut rng, DIM),
                    heading: heading(v, k),
                    attributes: [room_types[room_of[i]].to_string(), format!("obj{}", (i * k + v) % 7)]
                        .into_iter()
                        .collect(),
                })
                .collect(),
        })
        .collect();
    let rooms: Vec<Room> = room_types
        .iter()
        .enumerate()
        .map(|(r, t)| Room {
            id: format!("r{r}"),
            room_type: t.to_string(),
            member_viewpoints: (0..positions.len())
                .filter(|&i| room_of[i] == r)
                .map(vid)
                .collect::<BTreeSet<_>>(),
        })
        .collect();
    let pairs: Vec<(String, String)> = edges.iter().map(|&(a, b)| (vid(a), vid(b))).collect();
    EnvironmentGraph::new(env_id, SplitTag::Train, k, DIM, viewpoints, rooms, &pairs, None).unwrap()
}

/// Every node in one room.
pub fn graph(env_id: &str, positions: &[[f64; 3]], edges: &[(usize, usize)], k: usize, seed: u64) -> EnvironmentGraph {
    graph_with_rooms(env_id, positions, &vec![0; positions.len()], &["hallway"], edges, k, seed)
}

/// `n` nodes on a line, 1 m apart.
pub fn path_graph(n: usize, k: usize) -> EnvironmentGraph {
    let pos: Vec<[f64; 3]> = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    graph(&format!("path{n}"), &pos, &edges, k, n as u64)
}

/// Random connected graph: a random spanning tree plus extra edges, nodes at
/// random integer-free positions so that distinct paths rarely tie.
pub fn random_graph(seed: u64, max_nodes: usize) -> EnvironmentGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_nodes);
    let pos: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0, rng.random::<f64>()])
        .collect();
    let mut edges = BTreeSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        edges.insert((j, i));
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let edges: Vec<(usize, usize)> = edges.into_iter().collect();
    graph(&format!("rand{seed}"), &pos, &edges, K, seed)
}

/// Minimum weight over all simple paths, by depth-first enumeration.
pub fn brute_force_distance(g: &EnvironmentGraph, s: usize, t: usize) -> f64 {
    fn dfs(g: &EnvironmentGraph, u: usize, t: usize, acc: f64, seen: &mut Vec<bool>, best: &mut f64) {
        if u == t {
            *best = best.min(acc);
            return;
        }
        for &(v, w) in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                dfs(g, v, t, acc + w, seen, best);
                seen[v] = false;
            }
        }
    }
    let mut seen = vec![false; g.len()];
    seen[s] = true;
    let mut best = f64::INFINITY;
    dfs(g, s, t, 0.0, &mut seen, &mut best);
    best
}

/// Every simple path from s to t.
pub fn all_simple_paths(g: &EnvironmentGraph, s: usize, t: usize) -> Vec<Vec<usize>> {
    fn dfs(g: &EnvironmentGraph, path: &mut Vec<usize>, t: usize, seen: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let u = *path.last().unwrap();
        if u == t {
            out.push(path.clone());
            return;
        }
        for &(v, _) in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                path.push(v);
                dfs(g, path, t, seen, out);
                path.pop();
                seen[v] = false;
            }
        }
    }
    let mut seen = vec![false; g.len()];
    seen[s] = true;
    let mut out = Vec::new();
    dfs(g, &mut vec![s], t, &mut seen, &mut out);
    out
}

pub fn weight(g: &EnvironmentGraph, path: &[usize]) -> f64 {
    path.windows(2).map(|w| g.edge_weight(w[0], w[1]).unwrap()).sum()
}
