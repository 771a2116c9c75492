//! Candidate featurization.
//!
//! Each candidate is described by six numbers: a stop indicator, the best
//! cosine similarity between the encoded goal and the candidate's panorama
//! views, the caption/attribute overlap (language goals), the routed distance
//! from the current viewpoint, the recency of the candidate's room, and the
//! elapsed fraction of the step budget. The stop candidate describes the
//! current viewpoint.

use crate::datasets::{Goal, Modality};
use crate::envmodel::EnvironmentGraph;
use crate::error::{Result, SidError};
use crate::policy::params::PolicyParameters;
use crate::policy::state::AgentState;
use crate::policy::Action;

pub const N_FEATURES: usize = 6;
pub const F_STOP: usize = 0;
pub const F_SIM: usize = 1;
pub const F_OVERLAP: usize = 2;
pub const F_DISTANCE: usize = 3;
pub const F_RECENCY: usize = 4;
pub const F_STEP: usize = 5;

pub const DISTANCE_SCALE_M: f64 = 10.0;

#[derive(Debug, Clone)]
pub(crate) enum GoalInput {
    Visual(Vec<f64>),
    Language(Vec<usize>),
}

/// A goal encoded under fixed parameters, with per-viewpoint similarities.
#[derive(Debug, Clone)]
pub(crate) struct GoalContext {
    pub input: GoalInput,
    pub enc: Vec<f64>,
    pub enc_norm: f64,
    pub sim: Vec<f64>,
    pub best_view: Vec<usize>,
    caption: Option<Vec<String>>,
}

impl GoalContext {
    pub fn new(params: &PolicyParameters, goal: &Goal, graph: &EnvironmentGraph) -> Result<Self> {
        let d = params.dims.feature_dim;
        if graph.feature_dim() != d {
            return Err(SidError::InvalidConfig(format!(
                "environment features have dimension {}, policy expects {d}",
                graph.feature_dim()
            )));
        }
        goal.validate(graph)?;
        let w = &params.weights;
        let (input, enc, caption) = match goal.modality {
            Modality::Visual => {
                let g = goal.visual_feature(graph)?.to_vec();
                let mut enc = g.clone();
                for i in 0..d {
                    let row = &w.goal_map[i * d..(i + 1) * d];
                    enc[i] += row.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
                }
                (GoalInput::Visual(g), enc, None)
            }
            Modality::Language => {
                let caption = goal.caption.as_ref().expect("validated");
                let ids = caption
                    .tokens
                    .iter()
                    .map(|t| {
                        params
                            .vocab
                            .id(t)
                            .ok_or_else(|| SidError::InvalidGoal(format!("caption token `{t}` is not in the vocabulary")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut enc = vec![0.0; d];
                for &t in &ids {
                    for (e, x) in enc.iter_mut().zip(&w.token_embedding[t * d..(t + 1) * d]) {
                        *e += x;
                    }
                }
                let n = ids.len() as f64;
                enc.iter_mut().for_each(|e| *e /= n);
                (GoalInput::Language(ids), enc, Some(caption.tokens.clone()))
            }
        };
        let enc_norm = enc.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        let mut sim = Vec::with_capacity(graph.len());
        let mut best_view = Vec::with_capacity(graph.len());
        for vp in graph.viewpoints() {
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            for (k, view) in vp.panorama.iter().enumerate() {
                let c = view.feature.iter().zip(&enc).map(|(a, b)| a * b).sum::<f64>() / enc_norm;
                if c > best {
                    best = c;
                    arg = k;
                }
            }
            sim.push(best);
            best_view.push(arg);
        }
        Ok(Self { input, enc, enc_norm, sim, best_view, caption })
    }

    /// Largest fraction of caption tokens found among one view's attributes.
    pub fn overlap(&self, graph: &EnvironmentGraph, node: usize) -> f64 {
        let Some(tokens) = &self.caption else { return 0.0 };
        let best = graph
            .viewpoint(node)
            .panorama
            .iter()
            .map(|v| tokens.iter().filter(|t| v.attributes.contains(*t)).count())
            .max()
            .unwrap_or(0);
        best as f64 / tokens.len() as f64
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CandidateSet {
    pub actions: Vec<Action>,
    /// Viewpoint each candidate describes (the current one for stop).
    pub nodes: Vec<usize>,
    pub x: Vec<[f64; N_FEATURES]>,
}

impl CandidateSet {
    pub fn position(&self, action: Action) -> Option<usize> {
        self.actions.iter().position(|a| *a == action)
    }
}

pub(crate) fn build_candidates(
    ctx: &GoalContext,
    state: &AgentState,
    graph: &EnvironmentGraph,
    max_steps: usize,
) -> CandidateSet {
    let n = 1 + state.frontier().len();
    let mut actions = Vec::with_capacity(n);
    let mut nodes = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let step = state.step_count() as f64 / max_steps as f64;
    let cur = state.current();
    actions.push(Action::Stop);
    nodes.push(cur);
    x.push([1.0, ctx.sim[cur], ctx.overlap(graph, cur), 0.0, state.room_recency(graph.room_of(cur)), step]);
    let dist = state.frontier_distances(graph);
    for (&f, d) in state.frontier().iter().zip(dist) {
        actions.push(Action::Goto(f));
        nodes.push(f);
        x.push([
            0.0,
            ctx.sim[f],
            ctx.overlap(graph, f),
            d / DISTANCE_SCALE_M,
            state.room_recency(graph.room_of(f)),
            step,
        ]);
    }
    CandidateSet { actions, nodes, x }
}
