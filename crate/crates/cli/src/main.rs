//! `sid` — environment generation, dataset building, training, rollouts,
//! filtering, evaluation and the full self-improvement pipeline.
//!
//! Exit codes: 0 success, 1 runtime/IO failure, 2 usage or configuration
//! error, 3 malformed input, 4 invariant violation.

mod commands;
mod manifest;
mod sid_run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sid_core::SidError;

/// Default output root when `--out` is omitted.
pub const OUT_ROOT_ENV: &str = "SID_OUT_ROOT";

#[derive(Parser, Debug)]
#[command(name = "sid", version, about = "Self-improving demonstrations for goal-oriented navigation")]
struct Cli {
    /// Bound on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print only the JSON summary on stdout; no progress on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic environments.
    EnvGen(EnvGenArgs),
    /// Build shortest-path demonstrations for every (start, target) pair.
    BuildData(BuildDataArgs),
    /// Train a policy from scratch on a demonstration set.
    Train(TrainArgs),
    /// Roll a checkpoint out on the goals of a demonstration set.
    Rollout(RolloutArgs),
    /// Keep the successful episodes of a rollout log as demonstrations.
    Filter(FilterArgs),
    /// Score a rollout log.
    Eval(EvalArgs),
    /// Room and length statistics of a demonstration set.
    Stats(StatsArgs),
    /// Run the self-improvement pipeline and its comparisons.
    SidRun(SidRunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutArg {
    /// Output directory (default: $SID_OUT_ROOT/<command> or ./sid-out/<command>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl OutArg {
    pub fn resolve(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            let root = std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("sid-out"));
            root.join(command)
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Split {
    Train,
    Unseen,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Mode {
    Greedy,
    Sampled,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Style {
    Detail,
    ReverieLike,
    SoonLike,
}

#[derive(Args, Debug)]
pub struct EnvGenArgs {
    /// Generator seed of the first environment; the rest follow consecutively.
    #[arg(long, default_value_t = 1000)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub rooms: Option<usize>,
    #[arg(long)]
    pub vps_per_room: Option<usize>,
    /// Views per panorama (even, >= 4).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, action = clap::ArgAction::Set)]
    pub distractors: Option<bool>,
    #[arg(long, value_enum, default_value = "train")]
    pub split: Split,
    /// Pipeline config whose `generator` section supplies defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct BuildDataArgs {
    /// Directory written by `env-gen`.
    #[arg(long)]
    pub envs: PathBuf,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Replace image goals by captions of this style.
    #[arg(long, value_enum)]
    pub caption_style: Option<Style>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub envs: PathBuf,
    /// Demonstration directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Demonstrations whose pairs serve as validation episodes.
    #[arg(long)]
    pub val_data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub pretrain_iterations: Option<usize>,
    #[arg(long)]
    pub finetune_iterations: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct RolloutArgs {
    #[arg(long)]
    pub envs: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Demonstrations whose (start, goal) pairs are run.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "greedy")]
    pub mode: Mode,
    #[arg(long, default_value_t = sid_core::rollout::DEFAULT_L_MAX)]
    pub l_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Label of the split in reports.
    #[arg(long, default_value = "unseen")]
    pub split: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    /// Rollout log (JSON lines).
    #[arg(long)]
    pub rollouts: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub round: u32,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub envs: PathBuf,
    #[arg(long)]
    pub rollouts: PathBuf,
    #[arg(long, default_value = "unseen")]
    pub split: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub envs: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct SidRunArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Run only these global seeds (repeatable).
    #[arg(long)]
    pub seed: Vec<u64>,
    #[arg(long)]
    pub rounds: Option<u32>,
    #[command(flatten)]
    pub out: OutArg,
}

pub struct Ctx {
    pub quiet: bool,
}

impl Ctx {
    pub fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<SidError>() {
            return match e {
                SidError::InvalidParams(_) | SidError::OddPanorama(_) | SidError::InvalidConfig(_) => 2,
                SidError::Parse { .. } | SidError::Format { .. } | SidError::InvalidGraph(_) | SidError::InvalidDemonstration(_) => 3,
                SidError::Invariant(_) | SidError::EmptyRound { .. } | SidError::IllegalTarget(_) => 4,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<serde_json::Value> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(SidError::InvalidConfig("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let ctx = Ctx { quiet: cli.quiet };
    match cli.command {
        Command::EnvGen(a) => commands::env_gen(&ctx, a),
        Command::BuildData(a) => commands::build_data(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Rollout(a) => commands::rollout(&ctx, a),
        Command::Filter(a) => commands::filter(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
        Command::SidRun(a) => sid_run::sid_run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
