//! Pretraining (SAP, optionally mixed with MLM) followed by finetuning that
//! interleaves teacher forcing on demonstrations with oracle-supervised
//! student forcing.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{DemonstrationSet, Goal, Modality};
use crate::envmodel::EnvironmentGraph;
use crate::error::{Result, SidError};
use crate::policy::features::{build_candidates, GoalContext};
use crate::policy::mlm::{mlm_accumulate, mlm_mask, trajectory_context};
use crate::policy::params::{Hyperparameters, PolicyParameters, Weights};
use crate::policy::sampling::{decision_points, oracle_action, sample_sap_step, SamplingStrategy};
use crate::policy::scorer::{argmax, backward, forward, sap_accumulate};
use crate::policy::state::AgentState;
use crate::policy::Action;
use crate::rollout::{run_episodes, EpisodeSpec, Outcome, RolloutMode};
use crate::World;

/// Finetuning cycles through `teacher` teacher-forcing iterations, then
/// `student` student-forcing iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForcingSchedule {
    pub teacher: u32,
    pub student: u32,
}

impl Default for ForcingSchedule {
    fn default() -> Self {
        Self { teacher: 1, student: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub sampling_strategy: SamplingStrategy,
    pub forcing: ForcingSchedule,
    pub mlm_enabled: bool,
    pub mlm_mask_rate: f64,
    pub pretrain_iterations: usize,
    pub finetune_iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    /// Episode limit for student forcing and validation rollouts.
    pub l_max: usize,
    /// Validation interval (finetuning iterations).
    pub eval_every: usize,
    /// Pretraining stops once the running SAP loss falls below this (0 disables).
    pub loss_tolerance: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            sampling_strategy: SamplingStrategy::Revised,
            forcing: ForcingSchedule::default(),
            mlm_enabled: true,
            mlm_mask_rate: 0.15,
            pretrain_iterations: 3000,
            finetune_iterations: 3000,
            batch_size: 16,
            learning_rate: 0.05,
            hidden: 32,
            l_max: crate::rollout::DEFAULT_L_MAX,
            eval_every: 250,
            loss_tolerance: 0.0,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SidError::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.mlm_mask_rate > 0.0 && self.mlm_mask_rate < 1.0) {
            return bad(format!("mask rate {} outside (0, 1)", self.mlm_mask_rate));
        }
        if self.batch_size == 0 || self.hidden == 0 || self.l_max == 0 || self.eval_every == 0 {
            return bad("batch_size, hidden, l_max and eval_every must be positive".into());
        }
        if self.finetune_iterations > 0 && self.forcing.teacher + self.forcing.student == 0 {
            return bad("forcing schedule is empty".into());
        }
        if !(self.loss_tolerance >= 0.0) {
            return bad("loss tolerance must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretrain,
    Finetune,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingTask {
    Sap,
    Mlm,
    TeacherForcing,
    StudentForcing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub phase: Phase,
    pub task: TrainingTask,
    pub loss: f64,
    pub val_sr: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainStats {
    pub sap_iterations: usize,
    pub mlm_iterations: usize,
    pub teacher_iterations: usize,
    pub student_iterations: usize,
    /// Demonstration decisions supervised under teacher forcing.
    pub teacher_steps: usize,
    /// Shortest-path oracle queries made during student forcing.
    pub oracle_calls: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParameters,
    pub log: Vec<TrainLogRow>,
    pub stats: TrainStats,
    pub best_val_sr: Option<f64>,
    /// Finetuning iteration (1-based) of the returned checkpoint.
    pub best_iteration: Option<usize>,
}

struct Resolved<'a> {
    graph: &'a EnvironmentGraph,
    path: Vec<usize>,
    goal: &'a Goal,
}

fn resolve<'a>(world: &'a World, demos: &'a DemonstrationSet) -> Result<Vec<Resolved<'a>>> {
    demos
        .samples()
        .iter()
        .map(|s| {
            let graph = world.get(s.env_id())?;
            let path = s.trajectory.indices(graph)?;
            s.goal.validate(graph)?;
            Ok(Resolved { graph, path, goal: &s.goal })
        })
        .collect()
}

fn sgd(params: &mut PolicyParameters, grads: &Weights, count: usize, lr: f64) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    params.weights.add_scaled(-lr / count as f64, grads);
    if !params.weights.is_finite() {
        return Err(SidError::Invariant("training diverged to non-finite weights".into()));
    }
    Ok(())
}

/// Greedy success rate on `specs`.
pub(crate) fn validation_sr(params: &PolicyParameters, world: &World, specs: &[EpisodeSpec], l_max: usize) -> Result<f64> {
    let eps = run_episodes(params, world, specs, l_max, RolloutMode::Greedy, 0)?;
    Ok(eps.iter().filter(|e| e.outcome == Outcome::Success).count() as f64 / eps.len() as f64)
}

/// Trains `init` on `demos`. When `validation` is non-empty, the finetuning
/// checkpoint with the best greedy validation SR is returned. Student-forcing
/// episodes start from the demonstrations' (start, goal) pairs.
pub fn train(
    init: PolicyParameters,
    world: &World,
    demos: &DemonstrationSet,
    validation: &[EpisodeSpec],
    config: &TrainingConfig,
) -> Result<TrainOutcome> {
    train_with_goals(init, world, demos, &[], validation, config)
}

struct OracleGoal<'a> {
    graph: &'a EnvironmentGraph,
    start: usize,
    target: usize,
    goal: &'a Goal,
}

/// Like [`train`], but student-forcing episodes are drawn from `oracle_goals`
/// (falling back to the demonstrations' pairs when empty).
pub fn train_with_goals(
    init: PolicyParameters,
    world: &World,
    demos: &DemonstrationSet,
    oracle_goals: &[EpisodeSpec],
    validation: &[EpisodeSpec],
    config: &TrainingConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    init.validate()?;
    if demos.is_empty() {
        return Err(SidError::EmptyInput("no demonstrations to train on".into()));
    }
    let data = resolve(world, demos)?;
    let language: Vec<usize> =
        (0..data.len()).filter(|&i| data[i].goal.modality == Modality::Language).collect();
    let mlm_active = config.mlm_enabled && !language.is_empty();
    let student: Vec<OracleGoal> = if oracle_goals.is_empty() {
        data.iter()
            .map(|d| OracleGoal { graph: d.graph, start: d.path[0], target: *d.path.last().expect("non-empty"), goal: d.goal })
            .collect()
    } else {
        oracle_goals
            .iter()
            .map(|s| {
                let graph = world.get(&s.env_id)?;
                s.goal.validate(graph)?;
                Ok(OracleGoal {
                    graph,
                    start: graph.index_of(&s.start)?,
                    target: graph.index_of(&s.goal.target_viewpoint)?,
                    goal: &s.goal,
                })
            })
            .collect::<Result<_>>()?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init;
    params.dims.max_steps = config.l_max;
    params.hyper = Hyperparameters {
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        iterations: config.pretrain_iterations + config.finetune_iterations,
        seed: config.seed,
    };
    let lr = config.learning_rate;
    let mut log = Vec::new();
    let mut stats = TrainStats::default();
    let mut iteration = 0usize;

    let mut running: Option<f64> = None;
    for _ in 0..config.pretrain_iterations {
        iteration += 1;
        let mut grads = Weights::zeros(&params.dims);
        let mut loss = 0.0;
        let task = if mlm_active && rng.random_bool(0.5) { TrainingTask::Mlm } else { TrainingTask::Sap };
        match task {
            TrainingTask::Mlm => {
                stats.mlm_iterations += 1;
                for _ in 0..config.batch_size {
                    let d = &data[language[rng.random_range(0..language.len())]];
                    let caption = d.goal.caption.as_ref().expect("language goal has a caption");
                    let masked = mlm_mask(caption, config.mlm_mask_rate, &mut rng)?;
                    let ctx = trajectory_context(d.graph, &d.path);
                    loss += mlm_accumulate(&params, &masked, &ctx, &mut grads)?;
                }
            }
            _ => {
                stats.sap_iterations += 1;
                for _ in 0..config.batch_size {
                    let d = &data[rng.random_range(0..data.len())];
                    let step = sample_sap_step(&d.path, d.graph, config.sampling_strategy, &mut rng);
                    let ctx = GoalContext::new(&params, d.goal, d.graph)?;
                    loss += sap_accumulate(&params, &ctx, &step.state, d.graph, step.target, &mut grads)?;
                }
            }
        }
        sgd(&mut params, &grads, config.batch_size, lr)?;
        let loss = loss / config.batch_size as f64;
        log.push(TrainLogRow { iteration, phase: Phase::Pretrain, task, loss, val_sr: None });
        if task == TrainingTask::Sap {
            let r = running.map_or(loss, |r| 0.9 * r + 0.1 * loss);
            running = Some(r);
            if config.loss_tolerance > 0.0 && r < config.loss_tolerance {
                break;
            }
        }
    }

    let mut best: Option<(f64, usize, PolicyParameters)> = None;
    let cycle = (config.forcing.teacher + config.forcing.student) as usize;
    for it in 0..config.finetune_iterations {
        iteration += 1;
        let mut grads = Weights::zeros(&params.dims);
        let mut loss = 0.0;
        let mut count = 0usize;
        let task = if it % cycle < config.forcing.teacher as usize {
            TrainingTask::TeacherForcing
        } else {
            TrainingTask::StudentForcing
        };
        for _ in 0..config.batch_size {
            if task == TrainingTask::TeacherForcing {
                let d = &data[rng.random_range(0..data.len())];
                let ctx = GoalContext::new(&params, d.goal, d.graph)?;
                let decisions = decision_points(d.graph, &d.path);
                let mut state = AgentState::new(d.graph, d.path[0]);
                let mut at = 0;
                for (pos, action) in decisions {
                    state.advance(d.graph, &d.path[at..=pos]);
                    at = pos;
                    loss += sap_accumulate(&params, &ctx, &state, d.graph, action, &mut grads)?;
                    count += 1;
                }
            } else {
                let g = &student[rng.random_range(0..student.len())];
                let ctx = GoalContext::new(&params, g.goal, g.graph)?;
                let mut state = AgentState::new(g.graph, g.start);
                let mut len = 1;
                loop {
                    let cands = build_candidates(&ctx, &state, g.graph, params.dims.max_steps);
                    let oracle = oracle_action(g.graph, &state, g.target);
                    stats.oracle_calls += 1;
                    let t = cands
                        .position(oracle)
                        .ok_or_else(|| SidError::Invariant("oracle action is not a candidate".into()))?;
                    let fwd = forward(&params.weights, params.dims.hidden, &cands.x);
                    loss += backward(&params, &ctx, &cands, &fwd, t, g.graph, &mut grads);
                    count += 1;
                    let Action::Goto(n) = cands.actions[argmax(&fwd.probs)] else { break };
                    let route = state.route_to(g.graph, n).expect("frontier is reachable");
                    len += route.len() - 1;
                    if len > config.l_max {
                        break;
                    }
                    state.advance(g.graph, &route);
                }
            }
        }
        if task == TrainingTask::TeacherForcing {
            stats.teacher_iterations += 1;
            stats.teacher_steps += count;
        } else {
            stats.student_iterations += 1;
        }
        sgd(&mut params, &grads, count, lr)?;
        let mut row = TrainLogRow { iteration, phase: Phase::Finetune, task, loss: loss / count.max(1) as f64, val_sr: None };
        if !validation.is_empty() && ((it + 1) % config.eval_every == 0 || it + 1 == config.finetune_iterations) {
            let sr = validation_sr(&params, world, validation, config.l_max)?;
            row.val_sr = Some(sr);
            if best.as_ref().is_none_or(|(b, _, _)| sr > *b) {
                best = Some((sr, it + 1, params.clone()));
            }
        }
        log.push(row);
    }

    let (params, best_val_sr, best_iteration) = match best {
        Some((sr, it, p)) => (p, Some(sr), Some(it)),
        None => (params, None, None),
    };
    Ok(TrainOutcome { params, log, stats, best_val_sr, best_iteration })
}

/// Per-iteration training log as CSV.
pub fn write_train_log(path: &Path, rows: &[TrainLogRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["iteration", "phase", "task", "loss", "val_sr"]).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let phase = serde_json::to_value(r.phase).expect("enum").as_str().unwrap_or_default().to_string();
        let task = serde_json::to_value(r.task).expect("enum").as_str().unwrap_or_default().to_string();
        w.write_record([
            r.iteration.to_string(),
            phase,
            task,
            format!("{:.6}", r.loss),
            r.val_sr.map(|s| format!("{s:.4}")).unwrap_or_default(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| SidError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> SidError {
    SidError::Format { path: path.to_path_buf(), message: e.to_string() }
}
