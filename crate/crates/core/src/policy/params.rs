use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SidError};
use crate::policy::features::N_FEATURES;
use crate::vocab::Vocabulary;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDims {
    pub feature_dim: usize,
    pub vocab_size: usize,
    pub hidden: usize,
    pub mlm_hidden: usize,
    /// Step budget used to normalize the elapsed-steps feature.
    pub max_steps: usize,
}

impl PolicyDims {
    pub fn new(feature_dim: usize, vocab: &Vocabulary) -> Self {
        Self { feature_dim, vocab_size: vocab.len(), hidden: 32, mlm_hidden: 32, max_steps: 15 }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self
    }
}

/// All trainable tensors, row-major. Also used for gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// Residual map on visual goal features, `d x d`.
    pub goal_map: Vec<f64>,
    /// Token embeddings shared by the language goal encoder and MLM input, `V x d`.
    pub token_embedding: Vec<f64>,
    /// Candidate scorer hidden layer, `H x F`.
    pub hidden_w: Vec<f64>,
    pub hidden_b: Vec<f64>,
    pub output_w: Vec<f64>,
    /// MLM head: `Hm x 2d`, `Hm`, `V x Hm`, `V`.
    pub mlm_w1: Vec<f64>,
    pub mlm_b1: Vec<f64>,
    pub mlm_w2: Vec<f64>,
    pub mlm_b2: Vec<f64>,
}

impl Weights {
    pub fn zeros(dims: &PolicyDims) -> Self {
        let d = dims.feature_dim;
        Self {
            goal_map: vec![0.0; d * d],
            token_embedding: vec![0.0; dims.vocab_size * d],
            hidden_w: vec![0.0; dims.hidden * N_FEATURES],
            hidden_b: vec![0.0; dims.hidden],
            output_w: vec![0.0; dims.hidden],
            mlm_w1: vec![0.0; dims.mlm_hidden * 2 * d],
            mlm_b1: vec![0.0; dims.mlm_hidden],
            mlm_w2: vec![0.0; dims.vocab_size * dims.mlm_hidden],
            mlm_b2: vec![0.0; dims.vocab_size],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 9] {
        [
            &self.goal_map,
            &self.token_embedding,
            &self.hidden_w,
            &self.hidden_b,
            &self.output_w,
            &self.mlm_w1,
            &self.mlm_b1,
            &self.mlm_w2,
            &self.mlm_b2,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 9] {
        [
            &mut self.goal_map,
            &mut self.token_embedding,
            &mut self.hidden_w,
            &mut self.hidden_b,
            &mut self.output_w,
            &mut self.mlm_w1,
            &mut self.mlm_b1,
            &mut self.mlm_w2,
            &mut self.mlm_b2,
        ]
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Weights) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += alpha * b;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters {
    pub dims: PolicyDims,
    pub vocab: Vocabulary,
    pub weights: Weights,
    pub hyper: Hyperparameters,
}

impl PolicyParameters {
    pub fn validate(&self) -> Result<()> {
        let expect = Weights::zeros(&self.dims);
        for (i, (a, b)) in self.weights.tensors().iter().zip(expect.tensors()).enumerate() {
            if a.len() != b.len() {
                return Err(SidError::InvalidConfig(format!("weight tensor {i} has {} entries, expected {}", a.len(), b.len())));
            }
        }
        if self.dims.vocab_size != self.vocab.len() {
            return Err(SidError::InvalidConfig("vocabulary size disagrees with dimensions".into()));
        }
        if !self.weights.is_finite() {
            return Err(SidError::Invariant("non-finite policy weights".into()));
        }
        Ok(())
    }
}

/// Seeded initialization. The output layers start at zero, so an untrained
/// policy scores every candidate (and every MLM token) uniformly; the hidden
/// layers are random to break symmetry.
pub fn init_parameters(seed: u64, dims: PolicyDims, vocab: &Vocabulary) -> PolicyParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1f0c_a11b_0000_0000);
    let mut w = Weights::zeros(&dims);
    let mut fill = |t: &mut Vec<f64>, scale: f64| {
        for x in t.iter_mut() {
            *x = scale * rng.sample::<f64, _>(StandardNormal);
        }
    };
    fill(&mut w.goal_map, 0.01);
    fill(&mut w.token_embedding, 0.3);
    fill(&mut w.hidden_w, 1.0 / (N_FEATURES as f64).sqrt());
    fill(&mut w.hidden_b, 0.1);
    fill(&mut w.mlm_w1, 1.0 / ((2 * dims.feature_dim) as f64).sqrt());
    PolicyParameters {
        dims,
        vocab: vocab.clone(),
        weights: w,
        hyper: Hyperparameters { learning_rate: 0.0, batch_size: 0, iterations: 0, seed },
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    dims: PolicyDims,
    vocabulary: Vec<String>,
    hyper: Hyperparameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
    weights: Weights,
}

/// Checkpoint as JSON text; floats round-trip exactly.
pub fn checkpoint_json(params: &PolicyParameters, config: Option<serde_json::Value>) -> String {
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        dims: params.dims,
        vocabulary: (0..params.vocab.len()).map(|i| params.vocab.token(i).to_string()).collect(),
        hyper: params.hyper,
        config,
        weights: params.weights.clone(),
    };
    serde_json::to_string(&ck).expect("checkpoint serializes")
}

pub fn write_checkpoint(path: &Path, params: &PolicyParameters, config: Option<serde_json::Value>) -> Result<()> {
    std::fs::write(path, checkpoint_json(params, config) + "\n").map_err(|e| SidError::io(path, e))
}

pub fn parse_checkpoint(text: &str) -> std::result::Result<PolicyParameters, String> {
    let ck: Checkpoint = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(format!("unsupported checkpoint version {}", ck.version));
    }
    let vocab = Vocabulary::from_tokens(ck.vocabulary)?;
    let params = PolicyParameters { dims: ck.dims, vocab, weights: ck.weights, hyper: ck.hyper };
    params.validate().map_err(|e| e.to_string())?;
    Ok(params)
}

pub fn read_checkpoint(path: &Path) -> Result<PolicyParameters> {
    let text = std::fs::read_to_string(path).map_err(|e| SidError::io(path, e))?;
    parse_checkpoint(&text).map_err(|message| SidError::Format { path: path.to_path_buf(), message })
}
