//! Masked-language-modeling auxiliary task on goal captions, conditioned on
//! the trajectory that reaches the described viewpoint.

use rand::Rng;

use crate::datasets::Caption;
use crate::envmodel::EnvironmentGraph;
use crate::error::{Result, SidError};
use crate::policy::params::{PolicyParameters, Weights};
use crate::policy::scorer::softmax;
use crate::vocab::MASK_TOKEN;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedCaption {
    /// Caption with masked positions replaced by the mask token.
    pub tokens: Vec<String>,
    /// Masked positions, ascending.
    pub positions: Vec<usize>,
    /// Original tokens at `positions`.
    pub targets: Vec<String>,
}

/// Masks each token independently with probability `rate`; a draw with no
/// masked token is repeated, so at least one position is always masked.
pub fn mlm_mask<R: Rng + ?Sized>(caption: &Caption, rate: f64, rng: &mut R) -> Result<MaskedCaption> {
    if caption.tokens.is_empty() {
        return Err(SidError::EmptyInput("caption has no tokens".into()));
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(SidError::InvalidParams(format!("mask rate {rate} outside (0, 1]")));
    }
    loop {
        let positions: Vec<usize> = (0..caption.tokens.len()).filter(|_| rng.random::<f64>() < rate).collect();
        if positions.is_empty() {
            continue;
        }
        let mut tokens = caption.tokens.clone();
        let targets = positions.iter().map(|&p| std::mem::replace(&mut tokens[p], MASK_TOKEN.to_string())).collect();
        return Ok(MaskedCaption { tokens, positions, targets });
    }
}

/// Mean over distinct trajectory viewpoints of their mean view feature.
pub fn trajectory_context(graph: &EnvironmentGraph, path: &[usize]) -> Vec<f64> {
    let d = graph.feature_dim();
    let mut ctx = vec![0.0; d];
    let mut seen = vec![false; graph.len()];
    let mut n = 0usize;
    for &v in path {
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        n += 1;
        let pano = &graph.viewpoint(v).panorama;
        for view in pano {
            for (c, x) in ctx.iter_mut().zip(&view.feature) {
                *c += x / pano.len() as f64;
            }
        }
    }
    ctx.iter_mut().for_each(|c| *c /= n.max(1) as f64);
    ctx
}

/// Mean cross-entropy of the masked tokens, with gradients.
pub fn mlm_loss(params: &PolicyParameters, masked: &MaskedCaption, context: &[f64]) -> Result<(f64, Weights)> {
    let mut grads = Weights::zeros(&params.dims);
    let loss = mlm_accumulate(params, masked, context, &mut grads)?;
    Ok((loss, grads))
}

pub(crate) fn mlm_accumulate(
    params: &PolicyParameters,
    masked: &MaskedCaption,
    context: &[f64],
    grads: &mut Weights,
) -> Result<f64> {
    let d = params.dims.feature_dim;
    let hm = params.dims.mlm_hidden;
    let v = params.dims.vocab_size;
    if context.len() != d {
        return Err(SidError::InvalidConfig(format!("trajectory context has dimension {}, expected {d}", context.len())));
    }
    if masked.targets.is_empty() {
        return Err(SidError::EmptyInput("no masked tokens".into()));
    }
    let lookup = |t: &String| {
        params.vocab.id(t).ok_or_else(|| SidError::InvalidGoal(format!("caption token `{t}` is not in the vocabulary")))
    };
    let ids = masked.tokens.iter().map(lookup).collect::<Result<Vec<_>>>()?;
    let targets = masked.targets.iter().map(lookup).collect::<Result<Vec<_>>>()?;
    let w = &params.weights;

    let mut x = vec![0.0; 2 * d];
    let l = ids.len() as f64;
    for &t in &ids {
        for (xi, e) in x[..d].iter_mut().zip(&w.token_embedding[t * d..(t + 1) * d]) {
            *xi += e / l;
        }
    }
    x[d..].copy_from_slice(context);

    let u: Vec<f64> = (0..hm)
        .map(|j| {
            let row = &w.mlm_w1[j * 2 * d..(j + 1) * 2 * d];
            (w.mlm_b1[j] + row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()).tanh()
        })
        .collect();
    let logits: Vec<f64> = (0..v)
        .map(|k| w.mlm_b2[k] + w.mlm_w2[k * hm..(k + 1) * hm].iter().zip(&u).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let p = softmax(&logits);
    let m = targets.len() as f64;
    let loss = targets.iter().map(|&t| -p[t].max(f64::MIN_POSITIVE).ln()).sum::<f64>() / m;

    let mut dlogits = p;
    for &t in &targets {
        dlogits[t] -= 1.0 / m;
    }
    let mut du = vec![0.0; hm];
    for k in 0..v {
        grads.mlm_b2[k] += dlogits[k];
        for j in 0..hm {
            grads.mlm_w2[k * hm + j] += dlogits[k] * u[j];
            du[j] += w.mlm_w2[k * hm + j] * dlogits[k];
        }
    }
    let mut dx = vec![0.0; 2 * d];
    for j in 0..hm {
        let dpre = du[j] * (1.0 - u[j] * u[j]);
        grads.mlm_b1[j] += dpre;
        for i in 0..2 * d {
            grads.mlm_w1[j * 2 * d + i] += dpre * x[i];
            dx[i] += w.mlm_w1[j * 2 * d + i] * dpre;
        }
    }
    for &t in &ids {
        for (g, dxi) in grads.token_embedding[t * d..(t + 1) * d].iter_mut().zip(&dx[..d]) {
            *g += dxi / l;
        }
    }
    Ok(loss)
}
