use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::{CaptionStyle, DEFAULT_MAX_LEN, DEFAULT_MIN_LEN};
use crate::envmodel::GeneratorParams;
use crate::error::{Result, SidError};
use crate::policy::TrainingConfig;
use crate::rollout::{RolloutMode, DEFAULT_L_MAX};

/// Environments added after a given round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingStage {
    pub after_round: u32,
    /// Generator seeds of the new environments.
    pub envs: Vec<u64>,
}

/// Caption-goal pretraining followed by a downstream language task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub enabled: bool,
    /// Caption style of the transferred (pretraining) demonstrations.
    pub pretrain_style: CaptionStyle,
    /// Caption style of the downstream task.
    pub downstream_style: CaptionStyle,
    /// Number of train environments that carry downstream demonstrations.
    pub downstream_envs: usize,
    pub training: TrainingConfig,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            pretrain_style: CaptionStyle::SoonLike,
            downstream_style: CaptionStyle::ReverieLike,
            downstream_envs: 3,
            training: TrainingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub rounds: u32,
    pub generator: GeneratorParams,
    /// Generator seeds of the training environments.
    pub train_envs: Vec<u64>,
    /// Generator seeds of the held-out evaluation environments.
    pub unseen_envs: Vec<u64>,
    pub scaling: Vec<ScalingStage>,
    pub l_max: usize,
    /// Global seeds; the benchmark runs the whole pipeline once per seed.
    pub seeds: Vec<u64>,
    pub min_len: usize,
    pub max_len: usize,
    /// Fraction of base (start, target) pairs held out for checkpoint selection.
    pub validation_fraction: f64,
    /// Cap on validation episodes per evaluation.
    pub validation_episodes: usize,
    pub rollout_mode: RolloutMode,
    /// Also pretrain rounds >= 2 on the shortest-path base data.
    pub mix_shortest: bool,
    /// Student forcing runs over every goal-source pair rather than only the
    /// pairs of the current demonstrations.
    pub oracle_on_goal_source: bool,
    /// Stop early when unseen SR improves by less than this (absolute).
    pub early_stop_sr_delta: Option<f64>,
    pub training: TrainingConfig,
    pub transfer: TransferConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rounds: 3,
            generator: GeneratorParams::default(),
            train_envs: (1000..1020).collect(),
            unseen_envs: (1020..1025).collect(),
            scaling: vec![ScalingStage { after_round: 3, envs: (1025..1035).collect() }],
            l_max: DEFAULT_L_MAX,
            seeds: vec![0, 1, 2],
            min_len: DEFAULT_MIN_LEN,
            max_len: DEFAULT_MAX_LEN,
            validation_fraction: 0.1,
            validation_episodes: 96,
            rollout_mode: RolloutMode::Greedy,
            mix_shortest: false,
            oracle_on_goal_source: true,
            early_stop_sr_delta: None,
            training: TrainingConfig::default(),
            transfer: TransferConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SidError::InvalidConfig(m));
        self.generator.validate()?;
        self.training.validate()?;
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.train_envs.is_empty() || self.unseen_envs.is_empty() {
            return bad("train and unseen environment lists must be non-empty".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.l_max == 0 {
            return bad("l_max must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation fraction {} outside [0, 1)", self.validation_fraction));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in self.train_envs.iter().chain(&self.unseen_envs).chain(self.scaling.iter().flat_map(|s| &s.envs)) {
            if !seen.insert(*s) {
                return bad(format!("environment seed {s} appears more than once across splits"));
            }
        }
        for stage in &self.scaling {
            if stage.after_round == 0 || stage.after_round > self.rounds {
                return bad(format!("scaling after round {} is outside 1..={}", stage.after_round, self.rounds));
            }
        }
        if self.transfer.enabled {
            let t = &self.transfer;
            t.training.validate()?;
            if t.downstream_envs == 0 || t.downstream_envs > self.train_envs.len() {
                return bad(format!("downstream_envs {} outside 1..={}", t.downstream_envs, self.train_envs.len()));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SidError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SidError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| SidError::Format { path: path.to_path_buf(), message: e.to_string() })
    }
}
