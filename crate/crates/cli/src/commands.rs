use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sid_core::datasets::{
    build_base_dataset, read_demonstrations, transfer_to_language, write_demonstrations, CaptionStyle, DemoSample,
    DemonstrationSet,
};
use sid_core::envmodel::{generate_environment, read_environment, serialize_environment, shortest_path, SplitTag};
use sid_core::eval::{episode_csv, room_stats, score_episodes, summary_csv};
use sid_core::policy::{read_checkpoint, write_checkpoint, write_train_log};
use sid_core::rollout::{filter_rollouts, read_rollout_log, run_episodes, write_rollout_log, EpisodeSpec, RolloutMode};
use sid_core::sidloop::{train_from_scratch, PipelineConfig};
use sid_core::{SidError, World};

use crate::manifest::{file_sha256, OutDir};
use crate::{BuildDataArgs, Ctx, EnvGenArgs, EvalArgs, FilterArgs, Mode, RolloutArgs, Split, StatsArgs, Style, TrainArgs};

pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    env_id: String,
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct EnvIndex {
    environments: Vec<IndexEntry>,
}

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(PipelineConfig::read(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

/// Reads an `env-gen` directory, checking every file against the index.
pub fn load_envs(dir: &Path) -> Result<World> {
    let index_path = dir.join(INDEX_FILE);
    let text = std::fs::read_to_string(&index_path).with_context(|| format!("reading {}", index_path.display()))?;
    let index: EnvIndex = serde_json::from_str(&text)
        .map_err(|e| SidError::Format { path: index_path.clone(), message: e.to_string() })?;
    let mut world = World::new([]);
    for e in index.environments {
        let path = dir.join(&e.file);
        if file_sha256(&path)? != e.sha256 {
            return Err(SidError::Format { path, message: "content does not match the index hash".into() }.into());
        }
        let graph = read_environment(&path)?;
        if graph.env_id() != e.env_id {
            return Err(SidError::Format { path, message: format!("expected environment `{}`", e.env_id) }.into());
        }
        world.insert(graph);
    }
    Ok(world)
}

fn style(s: Style) -> CaptionStyle {
    match s {
        Style::Detail => CaptionStyle::Detail,
        Style::ReverieLike => CaptionStyle::ReverieLike,
        Style::SoonLike => CaptionStyle::SoonLike,
    }
}

fn dir_of(out: &OutDir) -> PathBuf {
    out.path("")
}

pub fn env_gen(ctx: &Ctx, a: EnvGenArgs) -> Result<serde_json::Value> {
    let mut params = load_config(a.config.as_deref())?.generator;
    if let Some(v) = a.rooms {
        params.rooms = v;
    }
    if let Some(v) = a.vps_per_room {
        params.vps_per_room = v;
    }
    if let Some(v) = a.k {
        params.k = v;
    }
    if let Some(v) = a.distractors {
        params.distractors = v;
    }
    if a.count == 0 {
        return Err(SidError::InvalidConfig("--count must be at least 1".into()).into());
    }
    params.validate()?;
    let split = match a.split {
        Split::Train => SplitTag::Train,
        Split::Unseen => SplitTag::Unseen,
    };
    let inputs: Vec<&Path> = a.config.as_deref().into_iter().collect();
    let out = OutDir::acquire(&a.out.resolve("env-gen"), "env-gen", &inputs)?;
    let mut entries = Vec::with_capacity(a.count);
    for i in 0..a.count as u64 {
        let graph = generate_environment(a.seed + i, &params)?.with_split(split);
        let file = format!("{}.env", graph.env_id());
        let path = out.write(&file, &serialize_environment(&graph))?;
        entries.push(IndexEntry { env_id: graph.env_id().into(), file, sha256: file_sha256(&path)? });
        ctx.progress(format!("generated {} ({} viewpoints)", graph.env_id(), graph.len()));
    }
    let ids: Vec<String> = entries.iter().map(|e| e.env_id.clone()).collect();
    out.write(INDEX_FILE, &(serde_json::to_string_pretty(&EnvIndex { environments: entries })? + "\n"))?;
    let config = json!({ "generator": params, "seed": a.seed, "count": a.count, "split": split });
    let manifest = out.finish(config, Some(a.seed))?;
    Ok(json!({ "command": "env-gen", "environments": ids, "config_hash": manifest.config_hash }))
}

pub fn build_data(ctx: &Ctx, a: BuildDataArgs) -> Result<serde_json::Value> {
    let cfg = load_config(a.config.as_deref())?;
    let min_len = a.min_len.unwrap_or(cfg.min_len);
    let max_len = a.max_len.unwrap_or(cfg.max_len);
    let world = load_envs(&a.envs)?;
    let mut inputs = vec![a.envs.as_path()];
    inputs.extend(a.config.as_deref());
    let out = OutDir::acquire(&a.out.resolve("build-data"), "build-data", &inputs)?;
    let graphs: Vec<_> = world.graphs().collect();
    let mut set = build_base_dataset(&graphs, min_len, max_len)?;
    if let Some(s) = a.caption_style {
        set = transfer_to_language(&set, style(s), &world)?;
    }
    write_demonstrations(&set, &dir_of(&out))?;
    ctx.progress(format!("{} demonstrations, {:.3} viewpoints on average", set.len(), set.avg_viewpoints()));
    let config = json!({
        "min_len": min_len,
        "max_len": max_len,
        "caption_style": a.caption_style.map(|s| style(s).to_string()),
    });
    let manifest = out.finish(config, None)?;
    Ok(json!({
        "command": "build-data",
        "sample_count": set.len(),
        "avg_viewpoints": set.avg_viewpoints(),
        "config_hash": manifest.config_hash,
    }))
}

pub fn train(ctx: &Ctx, a: TrainArgs) -> Result<serde_json::Value> {
    let cfg = load_config(a.config.as_deref())?;
    let mut training = cfg.training.clone();
    if let Some(v) = a.pretrain_iterations {
        training.pretrain_iterations = v;
    }
    if let Some(v) = a.finetune_iterations {
        training.finetune_iterations = v;
    }
    if let Some(v) = a.hidden {
        training.hidden = v;
    }
    if let Some(v) = a.learning_rate {
        training.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        training.batch_size = v;
    }
    training.validate()?;
    let world = load_envs(&a.envs)?;
    let data = read_demonstrations(&a.data)?;
    let validation = match &a.val_data {
        Some(p) => EpisodeSpec::from_demonstrations(&read_demonstrations(p)?),
        None => Vec::new(),
    };
    let mut inputs = vec![a.envs.as_path(), a.data.as_path()];
    inputs.extend(a.val_data.as_deref());
    inputs.extend(a.config.as_deref());
    let out = OutDir::acquire(&a.out.resolve("train"), "train", &inputs)?;
    ctx.progress(format!("training on {} demonstrations", data.len()));
    let outcome = train_from_scratch(&cfg, &training, &world, &data, &[], &validation, a.seed)?;
    let config = json!({ "training": training, "l_max": cfg.l_max, "generator": cfg.generator, "seed": a.seed });
    write_checkpoint(&out.path("checkpoint.json"), &outcome.params, Some(config.clone()))?;
    write_train_log(&out.path("train_log.csv"), &outcome.log)?;
    let manifest = out.finish(config, Some(a.seed))?;
    Ok(json!({
        "command": "train",
        "samples": data.len(),
        "best_val_sr": outcome.best_val_sr,
        "config_hash": manifest.config_hash,
    }))
}

fn write_report(out: &OutDir, report: &sid_core::eval::MetricsReport) -> Result<()> {
    out.write("episodes.csv", &episode_csv(report))?;
    out.write("summary.csv", &summary_csv(&[(report.split.as_str(), report)]))?;
    Ok(())
}

fn report_json(report: &sid_core::eval::MetricsReport) -> serde_json::Value {
    json!({
        "episodes": report.len(),
        "sr": report.sr,
        "osr": report.osr,
        "spl": report.spl,
        "tl": report.tl,
        "ne": report.ne,
    })
}

pub fn rollout(ctx: &Ctx, a: RolloutArgs) -> Result<serde_json::Value> {
    let world = load_envs(&a.envs)?;
    let params = read_checkpoint(&a.checkpoint)?;
    let specs = EpisodeSpec::from_demonstrations(&read_demonstrations(&a.data)?);
    let mode = match a.mode {
        Mode::Greedy => RolloutMode::Greedy,
        Mode::Sampled => RolloutMode::Sampled,
    };
    let out = OutDir::acquire(
        &a.out.resolve("rollout"),
        "rollout",
        &[a.envs.as_path(), a.checkpoint.as_path(), a.data.as_path()],
    )?;
    ctx.progress(format!("running {} episodes", specs.len()));
    let episodes = run_episodes(&params, &world, &specs, a.l_max, mode, a.seed)?;
    write_rollout_log(&out.path("rollouts.jsonl"), &episodes)?;
    let report = score_episodes(&episodes, &world, &a.split)?;
    write_report(&out, &report)?;
    let config = json!({ "mode": mode, "l_max": a.l_max, "split": a.split, "seed": a.seed });
    let manifest = out.finish(config, Some(a.seed))?;
    Ok(json!({ "command": "rollout", "report": report_json(&report), "config_hash": manifest.config_hash }))
}

pub fn filter(ctx: &Ctx, a: FilterArgs) -> Result<serde_json::Value> {
    let episodes = read_rollout_log(&a.rollouts)?;
    let out = OutDir::acquire(&a.out.resolve("filter"), "filter", &[a.rollouts.as_path()])?;
    let mut set = filter_rollouts(&episodes, a.round)?;
    set.episodes = Some(episodes.len());
    write_demonstrations(&set, &dir_of(&out))?;
    ctx.progress(format!("kept {} of {} episodes", set.len(), episodes.len()));
    let manifest = out.finish(json!({ "round": a.round }), None)?;
    Ok(json!({
        "command": "filter",
        "episodes": episodes.len(),
        "kept": set.len(),
        "config_hash": manifest.config_hash,
    }))
}

pub fn eval(_ctx: &Ctx, a: EvalArgs) -> Result<serde_json::Value> {
    let world = load_envs(&a.envs)?;
    let episodes = read_rollout_log(&a.rollouts)?;
    let out = OutDir::acquire(&a.out.resolve("eval"), "eval", &[a.envs.as_path(), a.rollouts.as_path()])?;
    let report = score_episodes(&episodes, &world, &a.split)?;
    write_report(&out, &report)?;
    let manifest = out.finish(json!({ "split": a.split }), None)?;
    Ok(json!({ "command": "eval", "report": report_json(&report), "config_hash": manifest.config_hash }))
}

pub fn stats(_ctx: &Ctx, a: StatsArgs) -> Result<serde_json::Value> {
    let world = load_envs(&a.envs)?;
    let data = read_demonstrations(&a.data)?;
    let out = OutDir::acquire(&a.out.resolve("stats"), "stats", &[a.envs.as_path(), a.data.as_path()])?;
    let shortest = data
        .samples()
        .iter()
        .map(|s| {
            let g = world.get(s.env_id())?;
            Ok(DemoSample { goal: s.goal.clone(), trajectory: shortest_path(g, s.trajectory.start(), &s.goal.target_viewpoint)? })
        })
        .collect::<sid_core::Result<Vec<_>>>()?;
    let shortest = DemonstrationSet::new(data.round_tag, shortest)?;
    let summary = json!({
        "sample_count": data.len(),
        "avg_viewpoints": data.avg_viewpoints(),
        "environments": data.envs(),
        "rooms": room_stats(data.samples(), &world)?,
        "shortest_avg_viewpoints": shortest.avg_viewpoints(),
        "shortest_rooms": room_stats(shortest.samples(), &world)?,
    });
    out.write("stats.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    let manifest = out.finish(json!({}), None)?;
    Ok(json!({ "command": "stats", "stats": summary, "config_hash": manifest.config_hash }))
}
