//! Line-delimited demonstration records plus a JSON manifest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::{Caption, CaptionStyle, DemoSample, DemonstrationSet, Goal, Manifest, Modality, Provenance, Trajectory};
use crate::error::{Result, SidError};

pub const DEMONSTRATIONS_FILE: &str = "demonstrations.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Serialize, Deserialize)]
pub(crate) struct GoalRecord {
    pub modality: Modality,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<CaptionStyle>,
}

impl From<&Goal> for GoalRecord {
    fn from(g: &Goal) -> Self {
        Self {
            modality: g.modality,
            target: g.target_viewpoint.clone(),
            view_index: g.view_index,
            caption: g.caption.as_ref().map(|c| c.tokens.clone()),
            style: g.caption.as_ref().map(|c| c.style),
        }
    }
}

impl From<Goal> for GoalRecord {
    fn from(g: Goal) -> Self {
        Self::from(&g)
    }
}

impl TryFrom<GoalRecord> for Goal {
    type Error = String;

    fn try_from(r: GoalRecord) -> Result<Self, String> {
        r.into_goal()
    }
}

impl GoalRecord {
    pub(crate) fn into_goal(self) -> Result<Goal, String> {
        match self.modality {
            Modality::Visual => {
                let view = self.view_index.ok_or("visual goal without view_index")?;
                Ok(Goal::visual(self.target, view))
            }
            Modality::Language => {
                let tokens = self.caption.ok_or("language goal without caption")?;
                if tokens.is_empty() {
                    return Err("empty caption".into());
                }
                let style = self.style.ok_or("language goal without style")?;
                Ok(Goal::language(self.target, Caption { tokens, style }))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    env_id: String,
    goal: GoalRecord,
    trajectory: Vec<String>,
    provenance: Provenance,
    round_tag: u32,
}

pub fn write_demonstrations(set: &DemonstrationSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SidError::io(dir, e))?;
    let path = dir.join(DEMONSTRATIONS_FILE);
    let file = File::create(&path).map_err(|e| SidError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for s in set.samples() {
        let rec = Record {
            env_id: s.trajectory.env_id.clone(),
            goal: GoalRecord::from(&s.goal),
            trajectory: s.trajectory.viewpoint_ids.clone(),
            provenance: s.trajectory.provenance,
            round_tag: s.trajectory.round_tag,
        };
        serde_json::to_writer(&mut w, &rec).expect("record serializes");
        w.write_all(b"\n").map_err(|e| SidError::io(&path, e))?;
    }
    w.flush().map_err(|e| SidError::io(&path, e))?;
    let mpath = dir.join(MANIFEST_FILE);
    let manifest = serde_json::to_string_pretty(&set.manifest()).expect("manifest serializes");
    std::fs::write(&mpath, manifest + "\n").map_err(|e| SidError::io(&mpath, e))
}

pub fn read_demonstrations(dir: &Path) -> Result<DemonstrationSet> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&mpath).map_err(|e| SidError::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| SidError::Format { path: mpath.clone(), message: e.to_string() })?;

    let path = dir.join(DEMONSTRATIONS_FILE);
    let file = File::open(&path).map_err(|e| SidError::io(&path, e))?;
    let mut samples = Vec::with_capacity(manifest.sample_count);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SidError::io(&path, e))?;
        let bad = |m: String| SidError::Format { path: path.clone(), message: format!("line {}: {m}", i + 1) };
        let rec: Record = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if rec.trajectory.is_empty() {
            return Err(bad("empty trajectory".into()));
        }
        let goal = rec.goal.into_goal().map_err(bad)?;
        if rec.trajectory.last() != Some(&goal.target_viewpoint) {
            return Err(bad("trajectory does not end at the goal target".into()));
        }
        samples.push(DemoSample {
            goal,
            trajectory: Trajectory {
                env_id: rec.env_id,
                viewpoint_ids: rec.trajectory,
                provenance: rec.provenance,
                round_tag: rec.round_tag,
            },
        });
    }
    let mut set = DemonstrationSet::new(manifest.round, samples)?;
    set.episodes = manifest.episodes;
    let actual = set.manifest();
    if actual.sample_count != manifest.sample_count
        || (actual.avg_viewpoints - manifest.avg_viewpoints).abs() > 1e-9
        || actual.envs != manifest.envs
    {
        return Err(SidError::Format {
            path: mpath,
            message: format!(
                "manifest disagrees with records ({} samples, avg {}) vs ({} samples, avg {})",
                manifest.sample_count, manifest.avg_viewpoints, actual.sample_count, actual.avg_viewpoints
            ),
        });
    }
    Ok(set)
}
