use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{Provenance, Trajectory};
use crate::envmodel::EnvironmentGraph;
use crate::error::{Result, SidError};

/// Uniform distribution over walk lengths (viewpoint counts), inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkLengths {
    pub min: usize,
    pub max: usize,
}

impl Default for WalkLengths {
    fn default() -> Self {
        Self { min: 7, max: 11 }
    }
}

impl WalkLengths {
    pub fn mean(&self) -> f64 {
        (self.min + self.max) as f64 / 2.0
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

/// Uniform random-neighbor walk from `start`. Revisits are allowed.
pub fn sample_random_walk<R: Rng + ?Sized>(
    graph: &EnvironmentGraph,
    start: &str,
    lengths: WalkLengths,
    rng: &mut R,
) -> Result<Trajectory> {
    if lengths.min == 0 || lengths.min > lengths.max {
        return Err(SidError::InvalidConfig(format!("invalid walk lengths [{}, {}]", lengths.min, lengths.max)));
    }
    let mut cur = graph.index_of(start)?;
    let len = lengths.draw(rng);
    let mut path = Vec::with_capacity(len);
    path.push(cur);
    while path.len() < len {
        let nbrs = graph.neighbors(cur);
        if nbrs.is_empty() {
            break;
        }
        cur = nbrs[rng.random_range(0..nbrs.len())].0;
        path.push(cur);
    }
    Ok(Trajectory::from_indices(graph, &path, Provenance::RandomWalk, 0))
}
