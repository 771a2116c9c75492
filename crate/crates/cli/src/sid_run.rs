//! `sid-run`: the pipeline with per-round artifacts on disk. A round whose
//! record matches the current configuration is loaded instead of recomputed.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sid_core::datasets::{read_demonstrations, write_demonstrations};
use sid_core::eval::{svg_line_chart, PlotSeries};
use sid_core::policy::{checkpoint_json, read_checkpoint, write_checkpoint};
use sid_core::sidloop::{
    build_environments, content_hash, demonstrations_hash, finish_seed, run_round, summary_tables, unseen_specs,
    PipelineConfig, RoundRecord, SeedRun, SidState, TransferConfig,
};

use crate::manifest::{config_hash, OutDir};
use crate::{Ctx, SidRunArgs};

const ROUND_FILE: &str = "round.json";

#[derive(Debug, Serialize, Deserialize)]
struct RoundFile {
    /// Depends only on the settings that shape this round and its
    /// predecessors.
    key: String,
    demonstrations: String,
    record: RoundRecord,
}

fn rounds_key_base(cfg: &PipelineConfig) -> String {
    let normalized =
        PipelineConfig { rounds: 1, seeds: vec![0], scaling: vec![], transfer: TransferConfig::default(), ..cfg.clone() };
    config_hash(&serde_json::to_value(&normalized).expect("config serializes"))
}

fn round_key(base: &str, seed: u64, round: u32) -> String {
    content_hash(format!("{base}|seed {seed}|round {round}").as_bytes())
}

/// Restores round `round` from `dir` if it was produced under `key` and its
/// artifacts are intact.
fn try_resume(state: &mut SidState, dir: &Path, key: &str, round: u32) -> Result<bool> {
    let Ok(text) = std::fs::read_to_string(dir.join(ROUND_FILE)) else { return Ok(false) };
    let Ok(file) = serde_json::from_str::<RoundFile>(&text) else { return Ok(false) };
    if file.key != key || file.record.round != round {
        return Ok(false);
    }
    let Ok(demos) = read_demonstrations(&dir.join("demonstrations")) else { return Ok(false) };
    let Ok(params) = read_checkpoint(&dir.join("checkpoint.json")) else { return Ok(false) };
    if demonstrations_hash(&demos) != file.demonstrations
        || content_hash(checkpoint_json(&params, None).as_bytes()) != file.record.checkpoint
    {
        return Ok(false);
    }
    state.round = round;
    state.params = Some(params);
    state.current = demos.clone();
    state.history.push(demos);
    state.records.push(file.record);
    Ok(true)
}

fn persist(out: &OutDir, rel: &str, state: &SidState, key: &str) -> Result<()> {
    let dir = out.path(rel);
    write_demonstrations(&state.current, &dir.join("demonstrations"))?;
    write_checkpoint(&dir.join("checkpoint.json"), state.params.as_ref().expect("trained"), None)?;
    let file = RoundFile {
        key: key.into(),
        demonstrations: demonstrations_hash(&state.current),
        record: state.records.last().expect("recorded").clone(),
    };
    out.write(format!("{rel}/{ROUND_FILE}"), &(serde_json::to_string_pretty(&file)? + "\n"))?;
    Ok(())
}

fn mean_per_round(runs: &[SeedRun], f: impl Fn(&RoundRecord) -> f64) -> Vec<f64> {
    let n = runs.iter().map(|r| r.rounds.len()).min().unwrap_or(0);
    (0..n).map(|t| runs.iter().map(|r| f(&r.rounds[t])).sum::<f64>() / runs.len() as f64).collect()
}

pub fn sid_run(ctx: &Ctx, a: SidRunArgs) -> Result<serde_json::Value> {
    let mut cfg = PipelineConfig::read(&a.config)?;
    if let Some(r) = a.rounds {
        cfg.rounds = r;
        cfg.scaling.retain(|s| s.after_round <= r);
    }
    if !a.seed.is_empty() {
        cfg.seeds = a.seed.clone();
    }
    cfg.validate()?;
    let out = OutDir::acquire(&a.out.resolve("sid-run"), "sid-run", &[a.config.as_path()])?;
    out.write("config.toml", &cfg.to_toml_string())?;

    let envs = build_environments(&cfg)?;
    let specs = unseen_specs(&envs.unseen, &cfg)?;
    let base = rounds_key_base(&cfg);
    let mut runs = Vec::new();
    let mut resumed = Vec::new();
    for &seed in &cfg.seeds {
        let mut state = SidState::new(&cfg, seed, &envs.train)?;
        for round in 1..=cfg.rounds {
            let rel = format!("seed-{seed}/round-{round:02}");
            let key = round_key(&base, seed, round);
            if try_resume(&mut state, &out.path(&rel), &key, round)? {
                ctx.progress(format!("seed {seed} round {round}: resumed"));
                resumed.push(json!({ "seed": seed, "round": round }));
                continue;
            }
            let rec = run_round(&mut state, &cfg, &envs.unseen, &specs)
                .with_context(|| format!("seed {seed} round {round}"))?;
            persist(&out, &rel, &state, &key)?;
            ctx.progress(format!(
                "seed {seed} round {round}: SR {:.3} SPL {:.3} OSR {:.3}, {} demonstrations ({:.2} viewpoints)",
                rec.unseen_sr, rec.unseen_spl, rec.unseen_osr, rec.demo_count, rec.demo_avg_vp
            ));
        }
        let run = finish_seed(&cfg, &envs, &specs, &state).with_context(|| format!("seed {seed} comparisons"))?;
        runs.push(run);
    }

    let tables = summary_tables(&runs)?;
    for (name, text) in tables.files() {
        out.write(name, text)?;
    }
    let labels: Vec<String> = (1..=mean_per_round(&runs, |r| r.unseen_sr).len()).map(|r| r.to_string()).collect();
    let metrics = [
        PlotSeries { name: "SR".into(), values: mean_per_round(&runs, |r| r.unseen_sr) },
        PlotSeries { name: "SPL".into(), values: mean_per_round(&runs, |r| r.unseen_spl) },
        PlotSeries { name: "OSR".into(), values: mean_per_round(&runs, |r| r.unseen_osr) },
    ];
    out.write("plot_metrics.svg", &svg_line_chart("Unseen metrics per round (seed mean)", &labels, &metrics))?;
    let vp = [PlotSeries { name: "Avg #VP".into(), values: mean_per_round(&runs, |r| r.demo_avg_vp) }];
    out.write("plot_avg_vp.svg", &svg_line_chart("Demonstration viewpoints per round (seed mean)", &labels, &vp))?;

    let config = serde_json::to_value(&cfg)?;
    let manifest = out.finish(config, cfg.seeds.first().copied())?;
    Ok(json!({
        "command": "sid-run",
        "rounds": labels.len(),
        "sr": metrics[0].values,
        "spl": metrics[1].values,
        "osr": metrics[2].values,
        "avg_vp": vp[0].values,
        "resumed": resumed,
        "config_hash": manifest.config_hash,
    }))
}
