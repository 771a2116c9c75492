//! Policy episodes, termination rules and success filtering.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{DemoSample, DemonstrationSet, Goal, Provenance, Trajectory};
use crate::envmodel::EnvironmentGraph;
use crate::error::{Result, SidError};
use crate::policy::{build_candidates, forward, oracle_action, Action, AgentState, GoalContext, PolicyParameters};
use crate::World;

pub const DEFAULT_L_MAX: usize = 15;

/// Anything that can drive an agent: the learned policy or a test double.
pub trait NavigationPolicy: Sync {
    /// Prepares per-episode state (e.g. the encoded goal).
    fn begin<'a>(&'a self, graph: &'a EnvironmentGraph, goal: &Goal) -> Result<Box<dyn Navigator + 'a>>;
}

pub trait Navigator {
    /// Candidate actions and their probabilities in `state`.
    fn distribution(&mut self, state: &AgentState) -> Result<(Vec<Action>, Vec<f64>)>;
}

struct LearnedNavigator<'a> {
    params: &'a PolicyParameters,
    graph: &'a EnvironmentGraph,
    ctx: GoalContext,
}

impl Navigator for LearnedNavigator<'_> {
    fn distribution(&mut self, state: &AgentState) -> Result<(Vec<Action>, Vec<f64>)> {
        let cands = build_candidates(&self.ctx, state, self.graph, self.params.dims.max_steps);
        let fwd = forward(&self.params.weights, self.params.dims.hidden, &cands.x);
        Ok((cands.actions, fwd.probs))
    }
}

impl NavigationPolicy for PolicyParameters {
    fn begin<'a>(&'a self, graph: &'a EnvironmentGraph, goal: &Goal) -> Result<Box<dyn Navigator + 'a>> {
        let ctx = GoalContext::new(self, goal, graph)?;
        Ok(Box::new(LearnedNavigator { params: self, graph, ctx }))
    }
}

/// Follows the shortest-path oracle and stops at the target.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShortestPathOracle;

struct OracleNavigator<'a> {
    graph: &'a EnvironmentGraph,
    target: usize,
}

impl Navigator for OracleNavigator<'_> {
    fn distribution(&mut self, state: &AgentState) -> Result<(Vec<Action>, Vec<f64>)> {
        Ok((vec![oracle_action(self.graph, state, self.target)], vec![1.0]))
    }
}

impl NavigationPolicy for ShortestPathOracle {
    fn begin<'a>(&'a self, graph: &'a EnvironmentGraph, goal: &Goal) -> Result<Box<dyn Navigator + 'a>> {
        let target = graph.index_of(&goal.target_viewpoint)?;
        Ok(Box::new(OracleNavigator { graph, target }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutMode {
    #[default]
    Greedy,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    WrongStop,
    StepLimitExceeded,
}

/// Where an episode starts and what it looks for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub env_id: String,
    pub start: String,
    pub goal: Goal,
}

impl EpisodeSpec {
    /// One spec per demonstration: its start viewpoint and its goal.
    pub fn from_demonstrations(set: &DemonstrationSet) -> Vec<EpisodeSpec> {
        set.samples()
            .iter()
            .map(|s| EpisodeSpec {
                env_id: s.trajectory.env_id.clone(),
                start: s.trajectory.start().to_string(),
                goal: s.goal.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// `stop` or the chosen viewpoint id.
    pub action: String,
    pub probability: f64,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub goal: Goal,
    pub trajectory: Trajectory,
    pub outcome: Outcome,
    /// Whether the episode ended with an explicit stop action.
    pub stopped: bool,
    pub l_max: usize,
    pub decisions: Vec<Decision>,
}

impl Episode {
    pub fn env_id(&self) -> &str {
        &self.trajectory.env_id
    }

    /// Outcome as implied by the trajectory, goal and limit alone.
    pub fn recompute_outcome(&self) -> Outcome {
        classify(&self.trajectory, &self.goal, self.stopped, self.l_max)
    }
}

pub fn classify(trajectory: &Trajectory, goal: &Goal, stopped: bool, l_max: usize) -> Outcome {
    if !stopped || trajectory.len() > l_max {
        Outcome::StepLimitExceeded
    } else if trajectory.terminal() == goal.target_viewpoint {
        Outcome::Success
    } else {
        Outcome::WrongStop
    }
}

fn pick<R: RngCore + ?Sized>(probs: &[f64], mode: RolloutMode, rng: &mut R) -> usize {
    match mode {
        RolloutMode::Greedy => crate::policy::argmax_index(probs),
        RolloutMode::Sampled => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            probs.len() - 1
        }
    }
}

/// Runs one episode. A goto whose route would push the trajectory past
/// `l_max` viewpoints ends the episode as `step_limit_exceeded`.
pub fn run_episode(
    policy: &dyn NavigationPolicy,
    graph: &EnvironmentGraph,
    spec: &EpisodeSpec,
    l_max: usize,
    mode: RolloutMode,
    rng: &mut dyn RngCore,
) -> Result<Episode> {
    if spec.env_id != graph.env_id() {
        return Err(SidError::InvalidGoal(format!(
            "episode for `{}` run in environment `{}`",
            spec.env_id,
            graph.env_id()
        )));
    }
    if l_max == 0 {
        return Err(SidError::InvalidConfig("l_max must be at least 1".into()));
    }
    spec.goal.validate(graph)?;
    let start = graph.index_of(&spec.start)?;
    let mut nav = policy.begin(graph, &spec.goal)?;
    let mut state = AgentState::new(graph, start);
    let mut path = vec![start];
    let mut decisions = Vec::new();
    let mut stopped = false;
    loop {
        let (actions, probs) = nav.distribution(&state)?;
        if actions.is_empty() || actions.len() != probs.len() {
            return Err(SidError::Invariant("policy returned no usable action distribution".into()));
        }
        let i = pick(&probs, mode, rng);
        let action = actions[i];
        decisions.push(Decision {
            action: match action {
                Action::Stop => "stop".into(),
                Action::Goto(n) => graph.id(n).to_string(),
            },
            probability: probs[i],
            candidates: actions.len(),
        });
        match action {
            Action::Stop => {
                stopped = true;
                break;
            }
            Action::Goto(n) => {
                if !state.frontier().contains(&n) {
                    return Err(SidError::IllegalTarget(format!("goto `{}` is not on the frontier", graph.id(n))));
                }
                let route = state
                    .route_to(graph, n)
                    .ok_or_else(|| SidError::Invariant(format!("no route to frontier viewpoint `{}`", graph.id(n))))?;
                if path.len() + route.len() - 1 > l_max {
                    break;
                }
                state.advance(graph, &route);
                path.extend_from_slice(&route[1..]);
            }
        }
    }
    let trajectory = Trajectory::from_indices(graph, &path, Provenance::AgentRollout, 0);
    let outcome = classify(&trajectory, &spec.goal, stopped, l_max);
    Ok(Episode { goal: spec.goal.clone(), trajectory, outcome, stopped, l_max, decisions })
}

/// Per-episode seed, independent of scheduling.
pub fn episode_seed(global_seed: u64, index: usize) -> u64 {
    let mut z = global_seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs every spec in parallel; results are in spec order and independent of
/// the worker count.
pub fn run_episodes(
    policy: &dyn NavigationPolicy,
    world: &World,
    specs: &[EpisodeSpec],
    l_max: usize,
    mode: RolloutMode,
    seed: u64,
) -> Result<Vec<Episode>> {
    specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let graph = world.get(&spec.env_id)?;
            let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(seed, i));
            run_episode(policy, graph, spec, l_max, mode, &mut rng)
        })
        .collect()
}

/// Successful episodes as demonstrations tagged `round_tag`.
pub fn filter_rollouts(episodes: &[Episode], round_tag: u32) -> Result<DemonstrationSet> {
    let samples = episodes
        .iter()
        .filter(|e| e.outcome == Outcome::Success)
        .map(|e| {
            let mut trajectory = e.trajectory.clone();
            trajectory.round_tag = round_tag;
            DemoSample { goal: e.goal.clone(), trajectory }
        })
        .collect();
    DemonstrationSet::new(round_tag, samples)
}

#[derive(Debug, Clone)]
pub struct RoundData {
    pub episodes: Vec<Episode>,
    pub demonstrations: DemonstrationSet,
}

/// Re-runs every (start, goal) pair of `goal_source` with `policy` and keeps
/// the successes.
pub fn generate_round_data(
    policy: &dyn NavigationPolicy,
    world: &World,
    goal_source: &DemonstrationSet,
    l_max: usize,
    mode: RolloutMode,
    seed: u64,
    round_tag: u32,
) -> Result<RoundData> {
    let specs = EpisodeSpec::from_demonstrations(goal_source);
    let mut episodes = run_episodes(policy, world, &specs, l_max, mode, seed)?;
    for e in &mut episodes {
        e.trajectory.round_tag = round_tag;
    }
    let mut demonstrations = filter_rollouts(&episodes, round_tag)?;
    demonstrations.episodes = Some(episodes.len());
    Ok(RoundData { episodes, demonstrations })
}

pub fn write_rollout_log(path: &Path, episodes: &[Episode]) -> Result<()> {
    let file = File::create(path).map_err(|e| SidError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in episodes {
        serde_json::to_writer(&mut w, e).expect("episode serializes");
        w.write_all(b"\n").map_err(|e| SidError::io(path, e))?;
    }
    w.flush().map_err(|e| SidError::io(path, e))
}

pub fn read_rollout_log(path: &Path) -> Result<Vec<Episode>> {
    let file = File::open(path).map_err(|e| SidError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SidError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ep: Episode = serde_json::from_str(&line)
            .map_err(|e| SidError::Format { path: path.to_path_buf(), message: format!("line {}: {e}", i + 1) })?;
        if ep.recompute_outcome() != ep.outcome {
            return Err(SidError::Format {
                path: path.to_path_buf(),
                message: format!("line {}: outcome disagrees with trajectory", i + 1),
            });
        }
        out.push(ep);
    }
    Ok(out)
}
