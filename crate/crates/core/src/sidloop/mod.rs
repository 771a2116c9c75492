//! The self-improvement loop: train from scratch on the latest
//! demonstrations, roll out on the base goals, keep the successes, repeat.

mod benchmark;
mod config;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::{build_base_dataset, DemoSample, DemonstrationSet, Goal};
use crate::envmodel::{generate_environment, EnvironmentGraph, GeneratorParams, SplitTag};
use crate::error::{Result, SidError};
use crate::eval::{evaluate, MetricsReport};
use crate::policy::{checkpoint_json, init_parameters, train_with_goals, PolicyDims, PolicyParameters, TrainOutcome, TrainingConfig};
use crate::rollout::{episode_seed, generate_round_data, EpisodeSpec};
use crate::vocab::Vocabulary;
use crate::World;

pub use benchmark::{finish_seed, run_benchmark, summary_tables, BenchmarkReport, LanguageResult, SeedRun, SummaryTables};
pub use config::{PipelineConfig, ScalingStage, TransferConfig};

/// Strategy tag of a round record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundStrategy {
    Sid,
    /// Scaling round whose new-environment data are agent rollouts.
    Explored,
    /// Scaling round whose new-environment data are shortest paths.
    Shortest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub strategy: RoundStrategy,
    pub seed: u64,
    /// Content hash of the training demonstrations.
    pub training_set: String,
    pub train_count: usize,
    pub train_avg_vp: f64,
    /// Content hash of the selected checkpoint.
    pub checkpoint: String,
    pub val_sr: Option<f64>,
    pub unseen_sr: f64,
    pub unseen_osr: f64,
    pub unseen_spl: f64,
    pub unseen_tl: f64,
    pub unseen_ne: f64,
    /// Demonstrations produced by this round's agent.
    pub demo_count: usize,
    pub demo_avg_vp: f64,
    pub episodes: usize,
    /// Successful rollouts contributed by newly added environments.
    pub new_env_demos: Option<usize>,
    pub wall_clock_s: f64,
}

/// Short hex digest.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

pub fn demonstrations_hash(set: &DemonstrationSet) -> String {
    let mut h = Sha256::new();
    for s in set.samples() {
        h.update(serde_json::to_vec(&s.goal).expect("goal serializes"));
        h.update(s.trajectory.env_id.as_bytes());
        for v in &s.trajectory.viewpoint_ids {
            h.update(b" ");
            h.update(v.as_bytes());
        }
        h.update(b"\n");
    }
    hex::encode(&h.finalize()[..8])
}

/// Derived seed for a named stage of a pipeline run.
pub fn stage_seed(seed: u64, stage: &str, index: u64) -> u64 {
    let salt = stage.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    episode_seed(seed ^ salt, index as usize)
}

#[derive(Debug, Clone)]
pub struct Environments {
    pub train: World,
    pub unseen: World,
    /// One world per scaling stage, in schedule order.
    pub scaling: Vec<World>,
}

pub fn generate_world(seeds: &[u64], params: &GeneratorParams, split: SplitTag) -> Result<World> {
    let graphs = seeds
        .par_iter()
        .map(|&s| generate_environment(s, params).map(|g| g.with_split(split)))
        .collect::<Result<Vec<_>>>()?;
    Ok(World::new(graphs))
}

pub fn build_environments(config: &PipelineConfig) -> Result<Environments> {
    Ok(Environments {
        train: generate_world(&config.train_envs, &config.generator, SplitTag::Train)?,
        unseen: generate_world(&config.unseen_envs, &config.generator, SplitTag::Unseen)?,
        scaling: config
            .scaling
            .iter()
            .map(|s| generate_world(&s.envs, &config.generator, SplitTag::Train))
            .collect::<Result<_>>()?,
    })
}

/// Base (start, target) pairs of `world` with every goal view.
pub fn base_dataset(world: &World, config: &PipelineConfig) -> Result<DemonstrationSet> {
    let graphs: Vec<&EnvironmentGraph> = world.graphs().collect();
    build_base_dataset(&graphs, config.min_len, config.max_len)
}

/// Evaluation episodes of the unseen split.
pub fn unseen_specs(unseen: &World, config: &PipelineConfig) -> Result<Vec<EpisodeSpec>> {
    Ok(EpisodeSpec::from_demonstrations(&base_dataset(unseen, config)?))
}

fn pair_key(s: &DemoSample) -> u64 {
    let text = format!("{}|{}|{}", s.trajectory.env_id, s.trajectory.start(), s.goal.target_viewpoint);
    u64::from_le_bytes(Sha256::digest(text.as_bytes())[..8].try_into().expect("8 bytes"))
}

/// Splits base data by (env, start, target) pair into training goals and
/// held-out validation episodes.
pub fn split_validation(base: &DemonstrationSet, fraction: f64, cap: usize) -> Result<(DemonstrationSet, Vec<EpisodeSpec>)> {
    let threshold = (fraction * u64::MAX as f64) as u64;
    let (held, kept): (Vec<DemoSample>, Vec<DemoSample>) =
        base.samples().iter().cloned().partition(|s| fraction > 0.0 && pair_key(s) < threshold);
    let held = DemonstrationSet::new(base.round_tag, held)?;
    let mut specs = EpisodeSpec::from_demonstrations(&held);
    if specs.len() > cap {
        let stride = specs.len() as f64 / cap as f64;
        specs = (0..cap).map(|i| specs[(i as f64 * stride) as usize].clone()).collect();
    }
    Ok((DemonstrationSet::new(base.round_tag, kept)?, specs))
}

pub fn policy_dims(config: &PipelineConfig, training: &TrainingConfig) -> PolicyDims {
    let vocab = Vocabulary::new(&config.generator.vocabulary);
    let mut dims = PolicyDims::new(config.generator.feature_dim, &vocab).with_hidden(training.hidden);
    dims.max_steps = training.l_max;
    dims
}

/// Fresh parameters, trained on `data`.
pub fn train_from_scratch(
    config: &PipelineConfig,
    training: &TrainingConfig,
    world: &World,
    data: &DemonstrationSet,
    oracle_goals: &[EpisodeSpec],
    validation: &[EpisodeSpec],
    seed: u64,
) -> Result<TrainOutcome> {
    let vocab = Vocabulary::new(&config.generator.vocabulary);
    let init = init_parameters(seed, policy_dims(config, training), &vocab);
    let training = TrainingConfig { seed, l_max: config.l_max, ..training.clone() };
    train_with_goals(init, world, data, oracle_goals, validation, &training)
}

/// Student-forcing goals for a run: the whole goal source, or (empty) the
/// training demonstrations' own pairs.
pub fn oracle_goals(state: &SidState, config: &PipelineConfig) -> Vec<EpisodeSpec> {
    if config.oracle_on_goal_source {
        EpisodeSpec::from_demonstrations(&state.goal_source)
    } else {
        Vec::new()
    }
}

/// Evolving state of one pipeline run.
#[derive(Debug, Clone)]
pub struct SidState {
    pub seed: u64,
    pub round: u32,
    /// Environments whose data may be trained on.
    pub world: World,
    /// Shortest-path base data whose (start, goal) pairs are re-run each round.
    pub goal_source: DemonstrationSet,
    pub validation: Vec<EpisodeSpec>,
    /// Latest demonstrations (the base data before round 1).
    pub current: DemonstrationSet,
    pub params: Option<PolicyParameters>,
    pub records: Vec<RoundRecord>,
    /// Demonstrations produced by each round, in order.
    pub history: Vec<DemonstrationSet>,
}

impl SidState {
    pub fn new(config: &PipelineConfig, seed: u64, train_world: &World) -> Result<Self> {
        let base = base_dataset(train_world, config)?;
        let (goal_source, validation) = split_validation(&base, config.validation_fraction, config.validation_episodes)?;
        if goal_source.is_empty() {
            return Err(SidError::EmptyInput("no base (start, goal) pairs in the training environments".into()));
        }
        Ok(Self {
            seed,
            round: 0,
            world: train_world.clone(),
            current: goal_source.clone(),
            goal_source,
            validation,
            params: None,
            records: Vec::new(),
            history: Vec::new(),
        })
    }

    /// Makes `new_envs` trainable and adds their base pairs to the goal
    /// source; returns those base pairs.
    pub fn add_environments(&mut self, new_envs: &World, config: &PipelineConfig) -> Result<DemonstrationSet> {
        let base = base_dataset(new_envs, config)?;
        self.world.extend(new_envs);
        self.goal_source = self.goal_source.clone().merged(base.clone());
        Ok(base)
    }
}

fn check_split_hygiene(data: &DemonstrationSet, unseen: &World) -> Result<()> {
    if let Some(e) = data.envs().iter().find(|e| unseen.contains(e)) {
        return Err(SidError::Invariant(format!("unseen environment `{e}` contributes training data")));
    }
    Ok(())
}

/// Trains a fresh agent on `data`, evaluates it and regenerates the
/// demonstrations over the goal source.
fn run_round_on(
    state: &mut SidState,
    data: &DemonstrationSet,
    strategy: RoundStrategy,
    config: &PipelineConfig,
    unseen: &World,
    specs: &[EpisodeSpec],
) -> Result<(RoundRecord, MetricsReport)> {
    let clock = Instant::now();
    let round = state.round + 1;
    check_split_hygiene(data, unseen)?;
    let seed = stage_seed(state.seed, "round", round as u64);
    let goals = oracle_goals(state, config);
    let outcome = train_from_scratch(config, &config.training, &state.world, data, &goals, &state.validation, seed)?;
    let params = outcome.params;
    let (_, report) = evaluate(&params, unseen, specs, config.l_max, "unseen")?;
    let generated = generate_round_data(
        &params,
        &state.world,
        &state.goal_source,
        config.l_max,
        config.rollout_mode,
        stage_seed(state.seed, "rollout", round as u64),
        round,
    )?;
    if generated.demonstrations.is_empty() {
        return Err(SidError::EmptyRound { round });
    }
    let record = RoundRecord {
        round,
        strategy,
        seed: state.seed,
        training_set: demonstrations_hash(data),
        train_count: data.len(),
        train_avg_vp: data.avg_viewpoints(),
        checkpoint: content_hash(checkpoint_json(&params, None).as_bytes()),
        val_sr: outcome.best_val_sr,
        unseen_sr: report.sr,
        unseen_osr: report.osr,
        unseen_spl: report.spl,
        unseen_tl: report.tl,
        unseen_ne: report.ne,
        demo_count: generated.demonstrations.len(),
        demo_avg_vp: generated.demonstrations.avg_viewpoints(),
        episodes: generated.episodes.len(),
        new_env_demos: None,
        wall_clock_s: clock.elapsed().as_secs_f64(),
    };
    state.round = round;
    state.params = Some(params);
    state.current = generated.demonstrations;
    state.history.push(state.current.clone());
    state.records.push(record.clone());
    Ok((record, report))
}

/// One SID round: round 1 imitates the shortest-path base data, later rounds
/// the previous round's demonstrations.
pub fn run_round(state: &mut SidState, config: &PipelineConfig, unseen: &World, specs: &[EpisodeSpec]) -> Result<RoundRecord> {
    let data = if state.round == 0 {
        state.goal_source.clone()
    } else if config.mix_shortest {
        state.current.clone().merged(state.goal_source.clone())
    } else {
        state.current.clone()
    };
    run_round_on(state, &data, RoundStrategy::Sid, config, unseen, specs).map(|(r, _)| r)
}

fn check_new_envs(state: &SidState, new_envs: &World, unseen: &World) -> Result<()> {
    for id in new_envs.ids() {
        if unseen.contains(id) {
            return Err(SidError::InvalidConfig(format!("scaling environment `{id}` belongs to the unseen split")));
        }
        if state.world.contains(id) {
            return Err(SidError::InvalidConfig(format!("scaling environment `{id}` is already in use")));
        }
    }
    Ok(())
}

/// Adds environments: the current agent explores their base goals, the
/// successes join the existing demonstrations, and a fresh agent is trained
/// on the union.
pub fn scale_environments(
    mut state: SidState,
    new_envs: &World,
    config: &PipelineConfig,
    unseen: &World,
    specs: &[EpisodeSpec],
) -> Result<SidState> {
    check_new_envs(&state, new_envs, unseen)?;
    if new_envs.is_empty() {
        state.round += 1;
        return Ok(state);
    }
    let params = state
        .params
        .clone()
        .ok_or_else(|| SidError::InvalidConfig("scaling needs a trained agent".into()))?;
    let round = state.round + 1;
    let base = state.add_environments(new_envs, config)?;
    let explored = generate_round_data(
        &params,
        new_envs,
        &base,
        config.l_max,
        config.rollout_mode,
        stage_seed(state.seed, "scaling", round as u64),
        round,
    )?;
    let new_count = explored.demonstrations.len();
    let data = state.current.clone().merged(explored.demonstrations).retag(round);
    run_round_on(&mut state, &data, RoundStrategy::Explored, config, unseen, specs)?;
    state.records.last_mut().expect("round recorded").new_env_demos = Some(new_count);
    Ok(state)
}

/// Like `scale_environments`, but the new environments contribute
/// shortest-path demonstrations. The input state is left untouched.
pub fn ablation_shortest_scaling(
    state: &SidState,
    new_envs: &World,
    config: &PipelineConfig,
    unseen: &World,
    specs: &[EpisodeSpec],
) -> Result<RoundRecord> {
    check_new_envs(state, new_envs, unseen)?;
    let mut state = state.clone();
    let round = state.round + 1;
    let base = state.add_environments(new_envs, config)?;
    let new_count = base.len();
    let data = state.current.clone().merged(base).retag(round);
    let (mut record, _) = run_round_on(&mut state, &data, RoundStrategy::Shortest, config, unseen, specs)?;
    record.new_env_demos = Some(new_count);
    Ok(record)
}

/// Result of one full pipeline run for one seed.
#[derive(Debug, Clone)]
pub struct SidRun {
    pub state: SidState,
    pub early_stopped: bool,
}

/// Runs `config.rounds` rounds for `seed`, applying scaling stages as
/// scheduled.
pub fn run_sid(config: &PipelineConfig, seed: u64, envs: &Environments) -> Result<SidRun> {
    config.validate()?;
    let specs = unseen_specs(&envs.unseen, config)?;
    let mut state = SidState::new(config, seed, &envs.train)?;
    let mut early_stopped = false;
    while state.round < config.rounds {
        let prev = state.records.last().map(|r| r.unseen_sr);
        let record = run_round(&mut state, config, &envs.unseen, &specs)?;
        for (stage, world) in config.scaling.iter().zip(&envs.scaling) {
            if stage.after_round == record.round {
                state = scale_environments(state, world, config, &envs.unseen, &specs)?;
            }
        }
        if let (Some(delta), Some(prev)) = (config.early_stop_sr_delta, prev) {
            if record.unseen_sr - prev < delta {
                early_stopped = true;
                break;
            }
        }
    }
    Ok(SidRun { state, early_stopped })
}

/// Random-walk demonstrations from the goal source's start viewpoints; each
/// goal is a random view of the walk's last viewpoint.
pub fn random_walk_demonstrations(
    goal_source: &DemonstrationSet,
    world: &World,
    lengths: crate::datasets::WalkLengths,
    seed: u64,
) -> Result<DemonstrationSet> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(goal_source.len());
    for s in goal_source.samples() {
        let graph = world.get(s.env_id())?;
        let trajectory = crate::datasets::sample_random_walk(graph, s.trajectory.start(), lengths, &mut rng)?;
        let goal = Goal::visual(trajectory.terminal(), rng.random_range(0..graph.k()));
        samples.push(DemoSample { goal, trajectory });
    }
    DemonstrationSet::new(0, samples)
}
