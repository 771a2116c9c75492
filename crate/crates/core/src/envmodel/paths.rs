//! Shortest paths with lexicographic tie-breaking.
//!
//! Among all minimum-weight paths the one with the lexicographically smallest
//! viewpoint id sequence is returned. Distances are computed by Dijkstra from
//! the destination; the path is then walked greedily from the start, always
//! taking the smallest-id neighbor that stays on a minimum-weight path. Since
//! viewpoint indices follow id order, this yields the lexicographic minimum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::datasets::{Provenance as TrajectoryProvenance, Trajectory};
use crate::envmodel::EnvironmentGraph;
use crate::error::{Result, SidError};

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then on node index
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Single-source distances restricted to nodes where `allowed` holds.
/// Disallowed or unreachable nodes get `f64::INFINITY`.
pub(crate) fn dijkstra_within(
    graph: &EnvironmentGraph,
    source: usize,
    allowed: impl Fn(usize) -> bool,
) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.len()];
    if !allowed(source) {
        return dist;
    }
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { cost: 0.0, node: source });
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(next, w) in graph.neighbors(node) {
            if !allowed(next) {
                continue;
            }
            let c = cost + w;
            if c < dist[next] {
                dist[next] = c;
                heap.push(HeapEntry { cost: c, node: next });
            }
        }
    }
    dist
}

pub(crate) fn all_pairs(graph: &EnvironmentGraph) -> Vec<f64> {
    let n = graph.len();
    let mut out = Vec::with_capacity(n * n);
    for s in 0..n {
        out.extend(dijkstra_within(graph, s, |_| true));
    }
    // Summation order differs between the two directions; keep one value.
    for a in 0..n {
        for b in 0..a {
            out[a * n + b] = out[b * n + a];
        }
    }
    out
}

/// Walks from `start` to `end` given distances *to* `end`.
fn walk(
    graph: &EnvironmentGraph,
    start: usize,
    end: usize,
    dist_to_end: &[f64],
    allowed: impl Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    if !dist_to_end[start].is_finite() {
        return None;
    }
    let mut path = vec![start];
    let mut cur = start;
    while cur != end {
        let here = dist_to_end[cur];
        let next = graph
            .neighbors(cur)
            .iter()
            .find(|&&(nb, w)| allowed(nb) && dist_to_end[nb].is_finite() && ties(w + dist_to_end[nb], here))
            .map(|&(nb, _)| nb)?;
        path.push(next);
        cur = next;
        if path.len() > graph.len() {
            return None;
        }
    }
    Some(path)
}

/// Index-level shortest path over the full graph, using the cached distance table.
pub(crate) fn shortest_indices(graph: &EnvironmentGraph, start: usize, end: usize) -> Vec<usize> {
    let mut path = vec![start];
    let mut cur = start;
    while cur != end {
        let here = graph.geodesic(cur, end);
        let next = graph
            .neighbors(cur)
            .iter()
            .find(|&&(nb, w)| ties(w + graph.geodesic(nb, end), here))
            .map(|&(nb, _)| nb)
            .expect("connected graph always has a next hop");
        path.push(next);
        cur = next;
    }
    path
}

/// Shortest path from `start` to `end` through nodes satisfying `allowed`
/// (both endpoints must be allowed). Returns the path and its weight.
pub(crate) fn shortest_within(
    graph: &EnvironmentGraph,
    start: usize,
    end: usize,
    allowed: impl Fn(usize) -> bool + Copy,
) -> Option<(Vec<usize>, f64)> {
    let dist = dijkstra_within(graph, end, allowed);
    let path = walk(graph, start, end, &dist, allowed)?;
    Some((path, dist[start]))
}

/// Minimum-weight path between two viewpoints, ties broken by the smallest id sequence.
pub fn shortest_path(graph: &EnvironmentGraph, start: &str, end: &str) -> Result<Trajectory> {
    let s = graph.index_of(start)?;
    let e = graph.index_of(end)?;
    if !graph.geodesic(s, e).is_finite() {
        return Err(SidError::Unreachable { from: start.to_string(), to: end.to_string() });
    }
    let path = shortest_indices(graph, s, e);
    Ok(Trajectory::from_indices(graph, &path, TrajectoryProvenance::Shortest, 0))
}

/// Weight of the shortest path between two viewpoints, in meters.
pub fn geodesic_distance(graph: &EnvironmentGraph, u: &str, v: &str) -> Result<f64> {
    let a = graph.index_of(u)?;
    let b = graph.index_of(v)?;
    let d = graph.geodesic(a, b);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(SidError::Unreachable { from: u.to_string(), to: v.to_string() })
    }
}

/// Summed edge weights along an index path. `None` if a hop is not an edge.
pub(crate) fn path_weight(graph: &EnvironmentGraph, path: &[usize]) -> Option<f64> {
    path.windows(2)
        .map(|w| graph.edge_weight(w[0], w[1]))
        .sum::<Option<f64>>()
}
