use crate::datasets::{DemoSample, DemonstrationSet, Goal, Provenance, Trajectory};
use crate::envmodel::{paths, EnvironmentGraph};
use crate::error::{Result, SidError};

pub const DEFAULT_MIN_LEN: usize = 5;
pub const DEFAULT_MAX_LEN: usize = 7;

/// Round-0 data: every ordered viewpoint pair whose shortest path has between
/// `min_len` and `max_len` viewpoints, fanned out to one visual goal per
/// panorama view of the terminal viewpoint.
pub fn build_base_dataset(graphs: &[&EnvironmentGraph], min_len: usize, max_len: usize) -> Result<DemonstrationSet> {
    if graphs.is_empty() {
        return Err(SidError::EmptyInput("no environments given".into()));
    }
    if min_len == 0 || min_len > max_len {
        return Err(SidError::InvalidConfig(format!("invalid path length range [{min_len}, {max_len}]")));
    }
    let mut samples = Vec::new();
    for graph in graphs {
        for (start, end, path) in base_pairs(graph, min_len, max_len) {
            debug_assert_eq!((path[0], *path.last().unwrap()), (start, end));
            let trajectory = Trajectory::from_indices(graph, &path, Provenance::Shortest, 0);
            for view in 0..graph.k() {
                samples.push(DemoSample {
                    goal: Goal::visual(graph.id(end), view),
                    trajectory: trajectory.clone(),
                });
            }
        }
    }
    DemonstrationSet::new(0, samples)
}

/// Ordered `(start, end, path)` triples retained by the length filter.
pub(crate) fn base_pairs(graph: &EnvironmentGraph, min_len: usize, max_len: usize) -> Vec<(usize, usize, Vec<usize>)> {
    let mut out = Vec::new();
    for start in 0..graph.len() {
        for end in 0..graph.len() {
            if start == end && min_len > 1 {
                continue;
            }
            let path = paths::shortest_indices(graph, start, end);
            if (min_len..=max_len).contains(&path.len()) {
                out.push((start, end, path));
            }
        }
    }
    out
}
