//! One-hidden-layer candidate scorer with a softmax over candidates, and its
//! analytic gradients.

use crate::datasets::Goal;
use crate::envmodel::EnvironmentGraph;
use crate::error::{Result, SidError};
use crate::policy::features::{build_candidates, CandidateSet, GoalContext, GoalInput, F_SIM, N_FEATURES};
use crate::policy::params::{PolicyParameters, Weights};
use crate::policy::state::AgentState;
use crate::policy::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    Stop,
    Goto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionCandidate {
    pub kind: CandidateKind,
    pub target: Option<String>,
    pub features: Vec<f64>,
}

/// Candidates with their softmax probabilities. The stop candidate is first,
/// followed by frontier viewpoints in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub candidates: Vec<ActionCandidate>,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in xs.iter().enumerate() {
        if p > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) struct Forward {
    hidden: Vec<f64>,
    pub probs: Vec<f64>,
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

pub(crate) fn forward(w: &Weights, hidden: usize, x: &[[f64; N_FEATURES]]) -> Forward {
    let mut h = Vec::with_capacity(x.len() * hidden);
    let mut scores = Vec::with_capacity(x.len());
    for row in x {
        let mut s = 0.0;
        for j in 0..hidden {
            let wj = &w.hidden_w[j * N_FEATURES..(j + 1) * N_FEATURES];
            let pre = w.hidden_b[j] + wj.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
            let a = pre.tanh();
            h.push(a);
            s += w.output_w[j] * a;
        }
        scores.push(s);
    }
    Forward { hidden: h, probs: softmax(&scores) }
}

/// Adds the gradient of `-ln p[target]` into `grads` and returns the loss.
pub(crate) fn backward(
    params: &PolicyParameters,
    ctx: &GoalContext,
    cands: &CandidateSet,
    fwd: &Forward,
    target: usize,
    graph: &EnvironmentGraph,
    grads: &mut Weights,
) -> f64 {
    let w = &params.weights;
    let hdim = params.dims.hidden;
    let d = params.dims.feature_dim;
    let mut d_enc = vec![0.0; d];
    let mut dpre = vec![0.0; hdim];
    for (c, row) in cands.x.iter().enumerate() {
        let ds = fwd.probs[c] - if c == target { 1.0 } else { 0.0 };
        let h = &fwd.hidden[c * hdim..(c + 1) * hdim];
        let mut dsim = 0.0;
        for j in 0..hdim {
            grads.output_w[j] += ds * h[j];
            dpre[j] = ds * w.output_w[j] * (1.0 - h[j] * h[j]);
            grads.hidden_b[j] += dpre[j];
            let gw = &mut grads.hidden_w[j * N_FEATURES..(j + 1) * N_FEATURES];
            for (g, xi) in gw.iter_mut().zip(row) {
                *g += dpre[j] * xi;
            }
            dsim += w.hidden_w[j * N_FEATURES + F_SIM] * dpre[j];
        }
        if dsim != 0.0 {
            // d cos(enc, v) / d enc = v / |enc| - cos * enc / |enc|^2
            let node = cands.nodes[c];
            let v = &graph.viewpoint(node).panorama[ctx.best_view[node]].feature;
            let cos = ctx.sim[node];
            let n = ctx.enc_norm;
            for i in 0..d {
                d_enc[i] += dsim * (v[i] / n - cos * ctx.enc[i] / (n * n));
            }
        }
    }
    match &ctx.input {
        GoalInput::Visual(g) => {
            for i in 0..d {
                let row = &mut grads.goal_map[i * d..(i + 1) * d];
                for (gm, gj) in row.iter_mut().zip(g) {
                    *gm += d_enc[i] * gj;
                }
            }
        }
        GoalInput::Language(ids) => {
            let n = ids.len() as f64;
            for &t in ids {
                for (ge, de) in grads.token_embedding[t * d..(t + 1) * d].iter_mut().zip(&d_enc) {
                    *ge += de / n;
                }
            }
        }
    }
    -fwd.probs[target].max(f64::MIN_POSITIVE).ln()
}

/// Action distribution of the policy in `state` toward `goal`.
pub fn score_candidates(
    params: &PolicyParameters,
    goal: &Goal,
    state: &AgentState,
    graph: &EnvironmentGraph,
) -> Result<Distribution> {
    let ctx = GoalContext::new(params, goal, graph)?;
    let cands = build_candidates(&ctx, state, graph, params.dims.max_steps);
    let fwd = forward(&params.weights, params.dims.hidden, &cands.x);
    let candidates = cands
        .actions
        .iter()
        .zip(&cands.x)
        .map(|(a, x)| match a {
            Action::Stop => ActionCandidate { kind: CandidateKind::Stop, target: None, features: x.to_vec() },
            Action::Goto(n) => ActionCandidate {
                kind: CandidateKind::Goto,
                target: Some(graph.id(*n).to_string()),
                features: x.to_vec(),
            },
        })
        .collect();
    Ok(Distribution { candidates, probs: fwd.probs })
}

/// Softmax probabilities for explicit feature rows, in the given order.
pub fn score_features(params: &PolicyParameters, rows: &[[f64; N_FEATURES]]) -> Vec<f64> {
    forward(&params.weights, params.dims.hidden, rows).probs
}

/// Single-action-prediction loss: cross-entropy of the candidate distribution
/// at `target`, with gradients for every parameter tensor.
pub fn sap_loss(
    params: &PolicyParameters,
    goal: &Goal,
    state: &AgentState,
    graph: &EnvironmentGraph,
    target: Action,
) -> Result<(f64, Weights)> {
    let ctx = GoalContext::new(params, goal, graph)?;
    let mut grads = Weights::zeros(&params.dims);
    let loss = sap_accumulate(params, &ctx, state, graph, target, &mut grads)?;
    Ok((loss, grads))
}

pub(crate) fn sap_accumulate(
    params: &PolicyParameters,
    ctx: &GoalContext,
    state: &AgentState,
    graph: &EnvironmentGraph,
    target: Action,
    grads: &mut Weights,
) -> Result<f64> {
    let cands = build_candidates(ctx, state, graph, params.dims.max_steps);
    let t = cands.position(target).ok_or_else(|| {
        SidError::IllegalTarget(match target {
            Action::Stop => "stop".into(),
            Action::Goto(n) => format!("goto `{}` is not on the frontier", graph.id(n)),
        })
    })?;
    let fwd = forward(&params.weights, params.dims.hidden, &cands.x);
    Ok(backward(params, ctx, &cands, &fwd, t, graph, grads))
}
