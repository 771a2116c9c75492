//! Supervision targets: teacher-forced decision points along a trajectory,
//! the shortest-path oracle, and the SAP step-sampling strategies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envmodel::{paths, EnvironmentGraph};
use crate::policy::state::AgentState;
use crate::policy::Action;

/// Failure counts per decision step (steps 1..7) that weight hard-negative sampling.
pub const HARD_NEGATIVE_ERROR_COUNTS: [f64; 7] = [927.0, 295.0, 253.0, 189.0, 214.0, 98.0, 24.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingStrategy {
    /// 20% goal stop, 40% on-path step, 40% off-path detour.
    #[serde(rename = "original_20_40_40")]
    Original,
    /// 75% uniform on-path step, 25% histogram-weighted hard negative.
    #[serde(rename = "revised_75_25")]
    Revised,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    GoalStop,
    OnPath,
    OffPath,
    HardNegative,
}

#[derive(Debug, Clone)]
pub struct SapStep {
    pub state: AgentState,
    pub target: Action,
    pub kind: StepKind,
    /// Decision ordinal (0-based) the state was built from.
    pub decision: usize,
}

/// Teacher-forced decisions along `path`: `(position, action)` pairs.
///
/// Decisions happen at the start, at every first visit and at the end (stop).
/// A decision's action is the next not-yet-visited viewpoint; positions that
/// only pass through visited viewpoints are routing, not decisions.
pub fn decision_points(graph: &EnvironmentGraph, path: &[usize]) -> Vec<(usize, Action)> {
    let mut seen = vec![false; graph.len()];
    let mut first_visit = vec![false; path.len()];
    for (i, &v) in path.iter().enumerate() {
        if !seen[v] {
            seen[v] = true;
            first_visit[i] = true;
        }
    }
    let last = path.len() - 1;
    let mut out = Vec::new();
    for i in 0..last {
        if !first_visit[i] {
            continue;
        }
        if let Some(j) = (i + 1..path.len()).find(|&j| first_visit[j]) {
            out.push((i, Action::Goto(path[j])));
        }
    }
    out.push((last, Action::Stop));
    out
}

/// Oracle supervision from `state` toward `target`: stop on arrival, otherwise
/// the first unvisited viewpoint on the shortest path. If that path is fully
/// visited, the frontier viewpoint nearest the target.
pub fn oracle_action(graph: &EnvironmentGraph, state: &AgentState, target: usize) -> Action {
    let cur = state.current();
    if cur == target {
        return Action::Stop;
    }
    let path = paths::shortest_indices(graph, cur, target);
    if let Some(&n) = path.iter().find(|&&n| !state.is_visited(n)) {
        return Action::Goto(n);
    }
    state
        .frontier()
        .iter()
        .copied()
        .min_by(|&a, &b| graph.geodesic(a, target).total_cmp(&graph.geodesic(b, target)).then(a.cmp(&b)))
        .map_or(Action::Stop, Action::Goto)
}

/// Hard-negative step weights truncated to `n` decisions and normalized.
pub fn hard_negative_weights(n: usize) -> Vec<f64> {
    let m = n.min(HARD_NEGATIVE_ERROR_COUNTS.len());
    let total: f64 = HARD_NEGATIVE_ERROR_COUNTS[..m].iter().sum();
    HARD_NEGATIVE_ERROR_COUNTS[..m].iter().map(|c| c / total).collect()
}

fn draw_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn off_path_frontier(state: &AgentState, on_path: &[bool]) -> Vec<usize> {
    state.frontier().iter().copied().filter(|&n| !on_path[n]).collect()
}

/// Draws one SAP training state and its supervision target from a trajectory.
pub fn sample_sap_step<R: Rng + ?Sized>(
    path: &[usize],
    graph: &EnvironmentGraph,
    strategy: SamplingStrategy,
    rng: &mut R,
) -> SapStep {
    let decisions = decision_points(graph, path);
    let n = decisions.len();
    let target = *path.last().expect("non-empty trajectory");
    let mut on_path = vec![false; graph.len()];
    for &v in path {
        on_path[v] = true;
    }
    let at = |d: usize| AgentState::from_path(graph, &path[..=decisions[d].0]);
    let on_path_step = |d: usize, kind: StepKind| SapStep { state: at(d), target: decisions[d].1, kind, decision: d };

    match strategy {
        SamplingStrategy::Original => {
            let u: f64 = rng.random();
            if u < 0.2 || n == 1 {
                on_path_step(n - 1, StepKind::GoalStop)
            } else if u < 0.6 {
                on_path_step(rng.random_range(0..n - 1), StepKind::OnPath)
            } else {
                let d = rng.random_range(0..n);
                let mut state = at(d);
                let off = off_path_frontier(&state, &on_path);
                if off.is_empty() {
                    return on_path_step(rng.random_range(0..n - 1), StepKind::OnPath);
                }
                let detour = off[rng.random_range(0..off.len())];
                let route = state.route_to(graph, detour).expect("frontier is reachable");
                state.advance(graph, &route);
                let action = oracle_action(graph, &state, target);
                SapStep { state, target: action, kind: StepKind::OffPath, decision: d }
            }
        }
        SamplingStrategy::Revised => {
            if rng.random::<f64>() < 0.75 {
                on_path_step(rng.random_range(0..n), StepKind::OnPath)
            } else {
                let d = draw_weighted(&hard_negative_weights(n), rng);
                let mut state = at(d);
                let off = off_path_frontier(&state, &on_path);
                if !off.is_empty() {
                    state.mark_visited(graph, off[rng.random_range(0..off.len())]);
                }
                SapStep { state, target: decisions[d].1, kind: StepKind::HardNegative, decision: d }
            }
        }
    }
}
