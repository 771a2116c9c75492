//! Trajectories, goals and versioned demonstration sets.

mod base;
mod caption;
mod io;
mod random_walk;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::envmodel::EnvironmentGraph;
use crate::error::{Result, SidError};

pub use base::{build_base_dataset, DEFAULT_MAX_LEN, DEFAULT_MIN_LEN};
pub use caption::{caption_view, interleaved_indices, select_interleaved_views, transfer_to_language};
pub use io::{read_demonstrations, write_demonstrations, DEMONSTRATIONS_FILE, MANIFEST_FILE};
pub use random_walk::{sample_random_walk, WalkLengths};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Shortest,
    AgentRollout,
    RandomWalk,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Shortest => "shortest",
            Provenance::AgentRollout => "agent_rollout",
            Provenance::RandomWalk => "random_walk",
        })
    }
}

/// Ordered viewpoint sequence through one environment. Revisits are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub env_id: String,
    pub viewpoint_ids: Vec<String>,
    pub provenance: Provenance,
    pub round_tag: u32,
}

impl Trajectory {
    pub fn from_indices(graph: &EnvironmentGraph, path: &[usize], provenance: Provenance, round_tag: u32) -> Self {
        Self {
            env_id: graph.env_id().to_string(),
            viewpoint_ids: path.iter().map(|&i| graph.id(i).to_string()).collect(),
            provenance,
            round_tag,
        }
    }

    /// Number of viewpoints.
    pub fn len(&self) -> usize {
        self.viewpoint_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewpoint_ids.is_empty()
    }

    pub fn start(&self) -> &str {
        &self.viewpoint_ids[0]
    }

    pub fn terminal(&self) -> &str {
        self.viewpoint_ids.last().expect("trajectories are non-empty")
    }

    /// Resolves ids to indices and checks that consecutive viewpoints are adjacent.
    pub fn indices(&self, graph: &EnvironmentGraph) -> Result<Vec<usize>> {
        if self.env_id != graph.env_id() {
            return Err(SidError::InvalidDemonstration(format!(
                "trajectory belongs to `{}`, not `{}`",
                self.env_id,
                graph.env_id()
            )));
        }
        if self.viewpoint_ids.is_empty() {
            return Err(SidError::InvalidDemonstration("empty trajectory".into()));
        }
        let idx = self
            .viewpoint_ids
            .iter()
            .map(|id| graph.index_of(id))
            .collect::<Result<Vec<_>>>()?;
        for w in idx.windows(2) {
            if !graph.are_adjacent(w[0], w[1]) {
                return Err(SidError::InvalidDemonstration(format!(
                    "non-adjacent transition `{}` -> `{}` in `{}`",
                    graph.id(w[0]),
                    graph.id(w[1]),
                    graph.env_id()
                )));
            }
        }
        Ok(idx)
    }

    /// Summed edge weights in meters.
    pub fn length_m(&self, graph: &EnvironmentGraph) -> Result<f64> {
        let idx = self.indices(graph)?;
        Ok(crate::envmodel::paths::path_weight(graph, &idx).expect("adjacency checked"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Visual,
    Language,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionStyle {
    Detail,
    ReverieLike,
    SoonLike,
}

impl fmt::Display for CaptionStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaptionStyle::Detail => "detail",
            CaptionStyle::ReverieLike => "reverie_like",
            CaptionStyle::SoonLike => "soon_like",
        })
    }
}

impl std::str::FromStr for CaptionStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "detail" => Ok(CaptionStyle::Detail),
            "reverie_like" => Ok(CaptionStyle::ReverieLike),
            "soon_like" => Ok(CaptionStyle::SoonLike),
            other => Err(format!("unknown caption style `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub tokens: Vec<String>,
    pub style: CaptionStyle,
}

/// Description of a target viewpoint: one panorama view (visual) or a caption (language).
///
/// Visual goals store the view index; the feature is read from the
/// environment's panorama on demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "io::GoalRecord", into = "io::GoalRecord")]
pub struct Goal {
    pub target_viewpoint: String,
    pub modality: Modality,
    pub view_index: Option<usize>,
    pub caption: Option<Caption>,
}

impl Goal {
    pub fn visual(target: impl Into<String>, view_index: usize) -> Self {
        Self { target_viewpoint: target.into(), modality: Modality::Visual, view_index: Some(view_index), caption: None }
    }

    pub fn language(target: impl Into<String>, caption: Caption) -> Self {
        Self { target_viewpoint: target.into(), modality: Modality::Language, view_index: None, caption: Some(caption) }
    }

    pub fn visual_feature<'g>(&self, graph: &'g EnvironmentGraph) -> Result<&'g [f64]> {
        let view = self
            .view_index
            .ok_or_else(|| SidError::InvalidGoal("language goal has no visual feature".into()))?;
        let vp = graph.viewpoint(graph.index_of(&self.target_viewpoint)?);
        vp.panorama
            .get(view)
            .map(|v| v.feature.as_slice())
            .ok_or_else(|| SidError::InvalidGoal(format!("view index {view} out of range")))
    }

    pub fn validate(&self, graph: &EnvironmentGraph) -> Result<()> {
        let target = graph.index_of(&self.target_viewpoint)?;
        match self.modality {
            Modality::Visual => match self.view_index {
                Some(v) if v < graph.k() => Ok(()),
                Some(v) => Err(SidError::InvalidGoal(format!("view index {v} outside [0, {})", graph.k()))),
                None => Err(SidError::InvalidGoal("visual goal without view index".into())),
            },
            Modality::Language => match &self.caption {
                Some(c) if !c.tokens.is_empty() => Ok(()),
                _ => Err(SidError::InvalidGoal(format!(
                    "language goal for `{}` has no caption",
                    graph.id(target)
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoSample {
    pub goal: Goal,
    pub trajectory: Trajectory,
}

impl DemoSample {
    pub fn env_id(&self) -> &str {
        &self.trajectory.env_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub round: u32,
    pub sample_count: usize,
    pub avg_viewpoints: f64,
    pub envs: Vec<String>,
    /// Rollout episodes the set was filtered from, when it came from rollouts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
}

/// Demonstrations for one self-improvement round.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonstrationSet {
    pub round_tag: u32,
    samples: Vec<DemoSample>,
    pub episodes: Option<usize>,
}

impl DemonstrationSet {
    /// Checks that every trajectory ends at its goal target.
    pub fn new(round_tag: u32, samples: Vec<DemoSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.trajectory.is_empty() {
                return Err(SidError::InvalidDemonstration(format!("sample {i} has an empty trajectory")));
            }
            if s.trajectory.terminal() != s.goal.target_viewpoint {
                return Err(SidError::InvalidDemonstration(format!(
                    "sample {i} ends at `{}` but targets `{}`",
                    s.trajectory.terminal(),
                    s.goal.target_viewpoint
                )));
            }
        }
        Ok(Self { round_tag, samples, episodes: None })
    }

    pub fn empty(round_tag: u32) -> Self {
        Self { round_tag, samples: Vec::new(), episodes: None }
    }

    pub fn samples(&self) -> &[DemoSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<DemoSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean trajectory viewpoint count; 0 for an empty set.
    pub fn avg_viewpoints(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let total: usize = self.samples.iter().map(|s| s.trajectory.len()).sum();
        total as f64 / self.samples.len() as f64
    }

    pub fn envs(&self) -> Vec<String> {
        self.samples
            .iter()
            .map(|s| s.env_id().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            round: self.round_tag,
            sample_count: self.samples.len(),
            avg_viewpoints: self.avg_viewpoints(),
            envs: self.envs(),
            episodes: self.episodes,
        }
    }

    /// Concatenates `other` after `self`, keeping `self`'s round tag.
    pub fn merged(mut self, other: DemonstrationSet) -> Self {
        self.samples.extend(other.samples);
        self.episodes = match (self.episodes, other.episodes) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        self
    }

    pub fn retag(mut self, round_tag: u32) -> Self {
        self.round_tag = round_tag;
        self
    }
}
