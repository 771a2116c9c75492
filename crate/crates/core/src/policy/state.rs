use crate::envmodel::{paths, EnvironmentGraph};
use crate::error::{Result, SidError};

/// Navigation history of one agent: where it stands, what it has visited and
/// which unvisited viewpoints border the visited subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    current: usize,
    /// `(viewpoint, step of first visit)` in visiting order.
    visited: Vec<(usize, u32)>,
    is_visited: Vec<bool>,
    /// Step at which the agent last stood in each room.
    room_last: Vec<Option<u32>>,
    frontier: Vec<usize>,
    /// Viewpoints on the trajectory so far, counting revisits.
    steps: u32,
}

impl AgentState {
    pub fn new(graph: &EnvironmentGraph, start: usize) -> Self {
        let mut s = Self {
            current: start,
            visited: vec![(start, 1)],
            is_visited: vec![false; graph.len()],
            room_last: vec![None; graph.rooms().len()],
            frontier: Vec::new(),
            steps: 1,
        };
        s.is_visited[start] = true;
        s.room_last[graph.room_of(start)] = Some(1);
        s.refresh_frontier(graph);
        s
    }

    /// Replays a trajectory prefix hop by hop.
    pub fn from_path(graph: &EnvironmentGraph, path: &[usize]) -> Self {
        let mut s = Self::new(graph, path[0]);
        s.advance(graph, path);
        s
    }

    /// Moves along `route`, whose first element must be the current viewpoint.
    pub fn advance(&mut self, graph: &EnvironmentGraph, route: &[usize]) {
        debug_assert_eq!(route.first(), Some(&self.current));
        for &next in &route[1..] {
            self.steps += 1;
            self.current = next;
            if !self.is_visited[next] {
                self.is_visited[next] = true;
                self.visited.push((next, self.steps));
            }
            self.room_last[graph.room_of(next)] = Some(self.steps);
        }
        self.refresh_frontier(graph);
    }

    /// Records a viewpoint as already explored without moving there.
    pub fn mark_visited(&mut self, graph: &EnvironmentGraph, node: usize) {
        if !self.is_visited[node] {
            self.is_visited[node] = true;
            self.visited.push((node, self.steps));
            let room = graph.room_of(node);
            if self.room_last[room].is_none() {
                self.room_last[room] = Some(self.steps);
            }
            self.refresh_frontier(graph);
        }
    }

    fn refresh_frontier(&mut self, graph: &EnvironmentGraph) {
        let mut f = vec![false; graph.len()];
        for &(v, _) in &self.visited {
            for &(n, _) in graph.neighbors(v) {
                if !self.is_visited[n] {
                    f[n] = true;
                }
            }
        }
        self.frontier = (0..graph.len()).filter(|&i| f[i]).collect();
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn visited(&self) -> &[(usize, u32)] {
        &self.visited
    }

    pub fn is_visited(&self, node: usize) -> bool {
        self.is_visited[node]
    }

    /// Unvisited viewpoints adjacent to the visited set, ascending.
    pub fn frontier(&self) -> &[usize] {
        &self.frontier
    }

    pub fn step_count(&self) -> u32 {
        self.steps
    }

    /// `1 / (1 + steps since the agent last stood in the room)`, or 0 if never.
    pub fn room_recency(&self, room: usize) -> f64 {
        match self.room_last[room] {
            Some(t) => 1.0 / (1.0 + (self.steps - t) as f64),
            None => 0.0,
        }
    }

    /// Routed distance to every frontier viewpoint through the visited subgraph,
    /// aligned with [`AgentState::frontier`].
    pub fn frontier_distances(&self, graph: &EnvironmentGraph) -> Vec<f64> {
        let from_current = paths::dijkstra_within(graph, self.current, |n| self.is_visited[n]);
        self.frontier
            .iter()
            .map(|&f| {
                graph
                    .neighbors(f)
                    .iter()
                    .filter(|(n, _)| self.is_visited[*n])
                    .map(|(n, w)| from_current[*n] + w)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Shortest route from the current viewpoint to `target` through visited viewpoints.
    pub fn route_to(&self, graph: &EnvironmentGraph, target: usize) -> Option<Vec<usize>> {
        paths::shortest_within(graph, self.current, target, |n| self.is_visited[n] || n == target).map(|(p, _)| p)
    }

    /// Re-derives the frontier and checks the structural invariants.
    pub fn validate(&self, graph: &EnvironmentGraph) -> Result<()> {
        if !self.is_visited[self.current] {
            return Err(SidError::Invariant("current viewpoint is not visited".into()));
        }
        let mut copy = self.clone();
        copy.refresh_frontier(graph);
        if copy.frontier != self.frontier {
            return Err(SidError::Invariant("frontier differs from the adjacency-derived set".into()));
        }
        if self.frontier.iter().any(|&f| self.is_visited[f]) {
            return Err(SidError::Invariant("frontier intersects the visited set".into()));
        }
        Ok(())
    }
}
