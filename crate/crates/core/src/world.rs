use std::collections::BTreeMap;
use std::sync::Arc;

use crate::envmodel::EnvironmentGraph;
use crate::error::{Result, SidError};

/// Environments addressable by id.
#[derive(Debug, Clone, Default)]
pub struct World {
    graphs: BTreeMap<String, Arc<EnvironmentGraph>>,
}

impl World {
    pub fn new(graphs: impl IntoIterator<Item = EnvironmentGraph>) -> Self {
        let mut w = Self::default();
        for g in graphs {
            w.insert(g);
        }
        w
    }

    pub fn insert(&mut self, graph: EnvironmentGraph) {
        self.graphs.insert(graph.env_id().to_string(), Arc::new(graph));
    }

    pub fn extend(&mut self, other: &World) {
        for (k, v) in &other.graphs {
            self.graphs.insert(k.clone(), Arc::clone(v));
        }
    }

    pub fn get(&self, env_id: &str) -> Result<&EnvironmentGraph> {
        self.graphs
            .get(env_id)
            .map(|g| g.as_ref())
            .ok_or_else(|| SidError::UnknownEnvironment(env_id.to_string()))
    }

    pub fn contains(&self, env_id: &str) -> bool {
        self.graphs.contains_key(env_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.graphs.keys().map(String::as_str)
    }

    pub fn graphs(&self) -> impl Iterator<Item = &EnvironmentGraph> {
        self.graphs.values().map(|g| g.as_ref())
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Restricts to the named environments.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<World> {
        let mut out = World::default();
        for id in ids {
            let g = self.graphs.get(id).ok_or_else(|| SidError::UnknownEnvironment(id.to_string()))?;
            out.graphs.insert(id.to_string(), Arc::clone(g));
        }
        Ok(out)
    }
}
