//! The reference benchmark: SID rounds, scaling ablation, demonstration-source
//! comparison, room statistics and language transfer, for every seed.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datasets::{transfer_to_language, DemoSample, DemonstrationSet, WalkLengths};
use crate::envmodel::shortest_path;
use crate::error::Result;
use crate::eval::{compare_sources, evaluate, room_stats, ArmResult, DemoSource, MetricsReport, RoomStats};
use crate::policy::train;
use crate::rollout::EpisodeSpec;
use crate::sidloop::{
    ablation_shortest_scaling, build_environments, oracle_goals, random_walk_demonstrations, run_round, scale_environments,
    stage_seed, train_from_scratch, unseen_specs, Environments, PipelineConfig, RoundRecord, SidState,
};
use crate::World;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageResult {
    pub pretrain_samples: usize,
    pub downstream_samples: usize,
    pub finetuned: MetricsReport,
    pub scratch: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    pub scaling_explored: Option<RoundRecord>,
    pub scaling_shortest: Option<RoundRecord>,
    pub sources: Vec<(DemoSource, MetricsReport)>,
    /// Room statistics of round-2 agent demonstrations and of shortest paths
    /// for the same goals.
    pub rooms_agent: RoomStats,
    pub rooms_shortest: RoomStats,
    pub language: Option<LanguageResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryTables {
    pub rounds: String,
    pub scaling: String,
    pub sources: String,
    pub rooms: String,
    pub language: String,
}

impl SummaryTables {
    pub fn files(&self) -> [(&'static str, &str); 5] {
        [
            ("rounds.csv", &self.rounds),
            ("scaling.csv", &self.scaling),
            ("sources.csv", &self.sources),
            ("rooms.csv", &self.rooms),
            ("language.csv", &self.language),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub runs: Vec<SeedRun>,
    pub tables: SummaryTables,
}

fn shortest_counterparts(set: &DemonstrationSet, world: &World) -> Result<Vec<DemoSample>> {
    set.samples()
        .iter()
        .map(|s| {
            let graph = world.get(s.env_id())?;
            let trajectory = shortest_path(graph, s.trajectory.start(), &s.goal.target_viewpoint)?;
            Ok(DemoSample { goal: s.goal.clone(), trajectory })
        })
        .collect()
}

fn language_transfer(
    config: &PipelineConfig,
    state: &SidState,
    envs: &Environments,
) -> Result<Option<LanguageResult>> {
    let tc = &config.transfer;
    if !tc.enabled {
        return Ok(None);
    }
    let seed = stage_seed(state.seed, "language", 0);
    let pretrain_data = transfer_to_language(&state.current, tc.pretrain_style, &state.world)?;
    let pretrained = train_from_scratch(config, &tc.training, &state.world, &pretrain_data, &[], &[], seed)?.params;

    let downstream_ids: Vec<&str> = envs.train.ids().take(tc.downstream_envs).collect();
    let downstream_world = envs.train.subset(downstream_ids)?;
    let downstream_base = crate::sidloop::base_dataset(&downstream_world, config)?;
    let downstream = transfer_to_language(&downstream_base, tc.downstream_style, &downstream_world)?;
    let ft_config = crate::policy::TrainingConfig { seed, l_max: config.l_max, ..tc.training.clone() };
    let finetuned = train(pretrained, &downstream_world, &downstream, &[], &ft_config)?.params;
    let scratch = train_from_scratch(config, &tc.training, &downstream_world, &downstream, &[], &[], seed)?.params;

    let unseen_base = crate::sidloop::base_dataset(&envs.unseen, config)?;
    let unseen_lang = transfer_to_language(&unseen_base, tc.downstream_style, &envs.unseen)?;
    let specs = EpisodeSpec::from_demonstrations(&unseen_lang);
    let (_, finetuned) = evaluate(&finetuned, &envs.unseen, &specs, config.l_max, "unseen")?;
    let (_, scratch) = evaluate(&scratch, &envs.unseen, &specs, config.l_max, "unseen")?;
    Ok(Some(LanguageResult {
        pretrain_samples: pretrain_data.len(),
        downstream_samples: downstream.len(),
        finetuned,
        scratch,
    }))
}

fn run_seed(config: &PipelineConfig, envs: &Environments, specs: &[EpisodeSpec], seed: u64) -> Result<SeedRun> {
    let mut state = SidState::new(config, seed, &envs.train)?;
    while state.round < config.rounds {
        run_round(&mut state, config, &envs.unseen, specs)?;
    }
    finish_seed(config, envs, specs, &state)
}

/// Everything after the SID rounds of one seed: the scaling comparison
/// (first stage, applied to the final state), the demonstration-source arms,
/// room statistics and language transfer.
pub fn finish_seed(config: &PipelineConfig, envs: &Environments, specs: &[EpisodeSpec], state: &SidState) -> Result<SeedRun> {
    if state.history.is_empty() {
        return Err(crate::SidError::InvalidConfig("at least one completed round is required".into()));
    }
    let seed = state.seed;
    let state = state.clone();
    let (scaling_explored, scaling_shortest) = match envs.scaling.first() {
        Some(new_envs) => {
            let shortest = ablation_shortest_scaling(&state, new_envs, config, &envs.unseen, specs)?;
            let explored = scale_environments(state.clone(), new_envs, config, &envs.unseen, specs)?;
            (explored.records.last().cloned(), Some(shortest))
        }
        None => (None, None),
    };

    let arm_seed = stage_seed(seed, "sources", 0);
    let goals = oracle_goals(&state, config);
    let walks = random_walk_demonstrations(&state.goal_source, &state.world, WalkLengths::default(), arm_seed)?;
    let mut sources = Vec::new();
    for (source, data) in [
        (DemoSource::Shortest, &state.goal_source),
        (DemoSource::RandomWalk, &walks),
        (DemoSource::Agent, &state.current),
    ] {
        let params =
            train_from_scratch(config, &config.training, &state.world, data, &goals, &state.validation, arm_seed)?.params;
        let (_, report) = evaluate(&params, &envs.unseen, specs, config.l_max, "unseen")?;
        sources.push((source, report));
    }

    let agent_set = &state.history[1.min(state.history.len() - 1)];
    let rooms_agent = room_stats(agent_set.samples(), &state.world)?;
    let rooms_shortest = room_stats(&shortest_counterparts(agent_set, &state.world)?, &state.world)?;
    let language = language_transfer(config, &state, envs)?;

    Ok(SeedRun {
        seed,
        rounds: state.records.clone(),
        scaling_explored,
        scaling_shortest,
        sources,
        rooms_agent,
        rooms_shortest,
        language,
    })
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Summary tables over seeds, all plain CSV.
pub fn summary_tables(runs: &[SeedRun]) -> Result<SummaryTables> {
    let mut rounds = String::from("seed,round,osr,sr,spl,traj_num,avg_vp\n");
    let n_rounds = runs.iter().map(|r| r.rounds.len()).min().unwrap_or(0);
    for r in runs {
        for rec in &r.rounds {
            let _ = writeln!(
                rounds,
                "{},{},{:.6},{:.6},{:.6},{},{:.6}",
                r.seed, rec.round, rec.unseen_osr, rec.unseen_sr, rec.unseen_spl, rec.demo_count, rec.demo_avg_vp
            );
        }
    }
    for t in 0..n_rounds {
        let recs: Vec<&RoundRecord> = runs.iter().map(|r| &r.rounds[t]).collect();
        let _ = writeln!(
            rounds,
            "mean,{},{:.6},{:.6},{:.6},{:.1},{:.6}",
            t + 1,
            mean(recs.iter().map(|r| r.unseen_osr)),
            mean(recs.iter().map(|r| r.unseen_sr)),
            mean(recs.iter().map(|r| r.unseen_spl)),
            mean(recs.iter().map(|r| r.demo_count as f64)),
            mean(recs.iter().map(|r| r.demo_avg_vp)),
        );
    }

    let mut scaling = String::from("seed,strategy,new_env_demos,train_count,osr,sr,spl\n");
    for r in runs {
        for rec in [&r.scaling_explored, &r.scaling_shortest].into_iter().flatten() {
            let strategy = serde_json::to_value(rec.strategy).expect("enum");
            let _ = writeln!(
                scaling,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                r.seed,
                strategy.as_str().unwrap_or_default(),
                rec.new_env_demos.unwrap_or(0),
                rec.train_count,
                rec.unseen_osr,
                rec.unseen_sr,
                rec.unseen_spl
            );
        }
    }

    let seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    let arms: Vec<(DemoSource, ArmResult)> = [DemoSource::Shortest, DemoSource::RandomWalk, DemoSource::Agent]
        .into_iter()
        .map(|src| {
            let reports = runs
                .iter()
                .map(|r| r.sources.iter().find(|(s, _)| *s == src).map(|(_, m)| m.clone()).expect("arm present"))
                .collect();
            (src, ArmResult { label: src.to_string(), seeds: seeds.clone(), reports })
        })
        .collect();
    let sources = if runs.is_empty() { String::new() } else { crate::eval::comparison_csv(&compare_sources(&arms)?) };

    let mut rooms = String::from("seed,trajectories,rooms,room_types,target_type_rooms\n");
    for r in runs {
        for (label, s) in [("shortest", r.rooms_shortest), ("agent", r.rooms_agent)] {
            let _ = writeln!(rooms, "{},{label},{:.6},{:.6},{:.6}", r.seed, s.rooms, s.room_types, s.target_type_rooms);
        }
    }

    let mut language = String::from("seed,policy,osr,sr,spl,pretrain_samples,downstream_samples\n");
    for r in runs {
        if let Some(l) = &r.language {
            for (label, m) in [("finetuned", &l.finetuned), ("scratch", &l.scratch)] {
                let _ = writeln!(
                    language,
                    "{},{label},{:.6},{:.6},{:.6},{},{}",
                    r.seed, m.osr, m.sr, m.spl, l.pretrain_samples, l.downstream_samples
                );
            }
        }
    }
    Ok(SummaryTables { rounds, scaling, sources, rooms, language })
}

/// Runs the full benchmark for every configured seed.
pub fn run_benchmark(config: &PipelineConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let envs = build_environments(config)?;
    let specs = unseen_specs(&envs.unseen, config)?;
    let runs = config
        .seeds
        .iter()
        .map(|&seed| run_seed(config, &envs, &specs, seed))
        .collect::<Result<Vec<_>>>()?;
    let tables = summary_tables(&runs)?;
    Ok(BenchmarkReport { runs, tables })
}
