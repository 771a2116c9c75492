//! Navigation metrics (SR, OSR, SPL, TL, NE), room-exploration statistics and
//! paired comparison tables.

mod report;

use serde::{Deserialize, Serialize};

use crate::datasets::{DemoSample, Trajectory};
use crate::envmodel::EnvironmentGraph;
use crate::error::{Result, SidError};
use crate::rollout::{run_episodes, Episode, EpisodeSpec, NavigationPolicy, Outcome, RolloutMode};
use crate::World;

pub use report::{
    comparison_csv, episode_csv, read_episode_csv, summary_csv, svg_line_chart, write_text, PlotSeries,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub oracle_success: bool,
    pub trajectory_length_m: f64,
    pub shortest_length_m: f64,
    pub nav_error_m: f64,
    pub viewpoint_count: usize,
}

impl EpisodeResult {
    /// `S * l / max(l, p)`; a successful zero-length episode contributes 1.
    pub fn spl(&self) -> f64 {
        if !self.success {
            return 0.0;
        }
        let denom = self.shortest_length_m.max(self.trajectory_length_m);
        if denom == 0.0 {
            1.0
        } else {
            self.shortest_length_m / denom
        }
    }
}

pub fn score_episode(episode: &Episode, graph: &EnvironmentGraph) -> Result<EpisodeResult> {
    let path = episode.trajectory.indices(graph)?;
    let target = graph.index_of(&episode.goal.target_viewpoint)?;
    let terminal = *path.last().expect("non-empty trajectory");
    Ok(EpisodeResult {
        success: episode.outcome == Outcome::Success,
        oracle_success: path.contains(&target),
        trajectory_length_m: episode.trajectory.length_m(graph)?,
        shortest_length_m: graph.geodesic(path[0], target),
        nav_error_m: graph.geodesic(terminal, target),
        viewpoint_count: path.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: String,
    pub sr: f64,
    pub osr: f64,
    pub spl: f64,
    pub tl: f64,
    pub ne: f64,
    pub episodes: Vec<EpisodeResult>,
}

impl MetricsReport {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }
}

pub fn aggregate(results: &[EpisodeResult], split: &str) -> Result<MetricsReport> {
    if results.is_empty() {
        return Err(SidError::EmptyInput("no episodes to aggregate".into()));
    }
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    let report = MetricsReport {
        split: split.to_string(),
        sr: mean(&|r| r.success as u8 as f64),
        osr: mean(&|r| r.oracle_success as u8 as f64),
        spl: mean(&|r| r.spl()),
        tl: mean(&|r| r.trajectory_length_m),
        ne: mean(&|r| r.nav_error_m),
        episodes: results.to_vec(),
    };
    if !(report.spl <= report.sr && report.sr <= report.osr) {
        return Err(SidError::Invariant(format!(
            "metric ordering violated: SPL {} SR {} OSR {}",
            report.spl, report.sr, report.osr
        )));
    }
    Ok(report)
}

/// Scores rollout episodes against their environments.
pub fn score_episodes(episodes: &[Episode], world: &World, split: &str) -> Result<MetricsReport> {
    let results = episodes
        .iter()
        .map(|e| score_episode(e, world.get(e.env_id())?))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&results, split)
}

/// Greedy rollouts of `policy` on `specs`, scored.
pub fn evaluate(
    policy: &dyn NavigationPolicy,
    world: &World,
    specs: &[EpisodeSpec],
    l_max: usize,
    split: &str,
) -> Result<(Vec<Episode>, MetricsReport)> {
    let episodes = run_episodes(policy, world, specs, l_max, RolloutMode::Greedy, 0)?;
    let report = score_episodes(&episodes, world, split)?;
    Ok((episodes, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomStats {
    /// Mean distinct rooms entered.
    pub rooms: f64,
    /// Mean distinct room types entered.
    pub room_types: f64,
    /// Mean distinct rooms sharing the target's room type.
    pub target_type_rooms: f64,
}

/// Room counts of one trajectory toward `target`.
pub fn trajectory_rooms(trajectory: &Trajectory, target: &str, graph: &EnvironmentGraph) -> Result<(usize, usize, usize)> {
    let path = trajectory.indices(graph)?;
    let target_type = &graph.room(graph.room_of(graph.index_of(target)?)).room_type;
    let mut rooms: Vec<usize> = path.iter().map(|&v| graph.room_of(v)).collect();
    rooms.sort_unstable();
    rooms.dedup();
    let mut types: Vec<&str> = rooms.iter().map(|&r| graph.room(r).room_type.as_str()).collect();
    types.sort_unstable();
    types.dedup();
    let same = rooms.iter().filter(|&&r| &graph.room(r).room_type == target_type).count();
    Ok((rooms.len(), types.len(), same))
}

/// Averages room statistics over demonstration samples (target = goal target).
pub fn room_stats(samples: &[DemoSample], world: &World) -> Result<RoomStats> {
    if samples.is_empty() {
        return Err(SidError::EmptyInput("no trajectories for room statistics".into()));
    }
    let (mut a, mut b, mut c) = (0usize, 0usize, 0usize);
    for s in samples {
        let (r, t, same) = trajectory_rooms(&s.trajectory, &s.goal.target_viewpoint, world.get(s.env_id())?)?;
        a += r;
        b += t;
        c += same;
    }
    let n = samples.len() as f64;
    Ok(RoomStats { rooms: a as f64 / n, room_types: b as f64 / n, target_type_rooms: c as f64 / n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoSource {
    Shortest,
    RandomWalk,
    Agent,
}

impl std::fmt::Display for DemoSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DemoSource::Shortest => "shortest",
            DemoSource::RandomWalk => "random_walk",
            DemoSource::Agent => "agent",
        })
    }
}

/// Per-seed unseen metrics of one arm of a paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub label: String,
    pub seeds: Vec<u64>,
    pub reports: Vec<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub sr: f64,
    pub osr: f64,
    pub spl: f64,
    pub seeds: usize,
}

/// Seed-paired table of arm means; arms must share the exact seed list.
pub fn compare_arms(arms: &[ArmResult]) -> Result<Vec<ComparisonRow>> {
    let Some(first) = arms.first() else {
        return Err(SidError::EmptyInput("no comparison arms".into()));
    };
    arms.iter()
        .map(|arm| {
            if arm.seeds != first.seeds {
                return Err(SidError::InvalidConfig(format!(
                    "arm `{}` seeds {:?} do not pair with {:?}",
                    arm.label, arm.seeds, first.seeds
                )));
            }
            if arm.reports.len() != arm.seeds.len() || arm.seeds.is_empty() {
                return Err(SidError::InvalidConfig(format!("arm `{}` needs one report per seed", arm.label)));
            }
            let n = arm.reports.len() as f64;
            let mean = |f: fn(&MetricsReport) -> f64| arm.reports.iter().map(f).sum::<f64>() / n;
            Ok(ComparisonRow {
                label: arm.label.clone(),
                sr: mean(|r| r.sr),
                osr: mean(|r| r.osr),
                spl: mean(|r| r.spl),
                seeds: arm.seeds.len(),
            })
        })
        .collect()
}

/// Demonstration-source comparison: exactly one arm per source.
pub fn compare_sources(arms: &[(DemoSource, ArmResult)]) -> Result<Vec<ComparisonRow>> {
    let mut sources: Vec<DemoSource> = arms.iter().map(|(s, _)| *s).collect();
    sources.sort();
    if sources != [DemoSource::Shortest, DemoSource::RandomWalk, DemoSource::Agent] {
        return Err(SidError::InvalidConfig("source comparison needs shortest, random_walk and agent arms".into()));
    }
    let arms: Vec<ArmResult> = arms
        .iter()
        .map(|(s, a)| ArmResult { label: s.to_string(), ..a.clone() })
        .collect();
    compare_arms(&arms)
}
