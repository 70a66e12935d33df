//! `motion-manifold`: synthesize features, train the encoder, score videos,
//! and run subjective-study statistics and distortion sweeps.
//!
//! Exit status: 0 on success, 1 for usage or validation errors, 2 for I/O
//! errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub const OUTPUT_ROOT_ENV: &str = "MOTION_MANIFOLD_OUTPUT";

#[derive(Debug, Parser)]
#[command(name = "motion-manifold", version, about = "Action-manifold metrics for generated human-action videos")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set training.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Seed for initialization, batching, distortions and synthesis.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Root for default output locations [env: MOTION_MANIFOLD_OUTPUT, default: runs].
    #[arg(long, global = true)]
    pub output_root: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic dataset with an index.csv.
    Synth(SynthArgs),
    /// Train the encoder on the train split of an indexed dataset.
    Train(TrainArgs),
    /// Write window and video embeddings.
    Embed(EmbedArgs),
    /// Score videos: action consistency and temporal coherence.
    Score(ScoreArgs),
    /// Compute class centroids from labeled features.
    Centroids(CentroidArgs),
    /// Screen raters, compute MOS, and correlate metrics with MOS.
    Stats(StatsArgs),
    /// Distortion-sensitivity sweep over kinds and severities.
    Sweep(SweepArgs),
    /// Mean attention-fusion weight per feature group.
    AttentionReport(AttentionArgs),
    /// Keep the candidate windows closest to their class centroid.
    ActiveSample(ActiveArgs),
}

#[derive(Debug, Args)]
pub struct FeatureInput {
    /// Feature source: an index.csv, a directory holding one, or a directory of
    /// `<video_id>.manifest.json` files.
    #[arg(long)]
    pub features: PathBuf,
    /// Only use videos of this split (index inputs only).
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub videos_per_class: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub fps: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    /// Checkpoint directory to write.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub centroids: PathBuf,
    /// Output CSV; a JSON copy is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of csv,json.
    #[arg(long, default_value = "csv,json")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct CentroidArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Ratings CSV: rater_id, video_id, axis, score, is_duplicate_group.
    #[arg(long)]
    pub ratings: PathBuf,
    /// Only use rows of this rating axis.
    #[arg(long)]
    pub axis: Option<String>,
    /// Video metadata CSV: video_id, model, prompt (enables win ratios).
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Scores CSV from `score`, correlated against MOS.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Videos to draw rater-convergence curves for (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub convergence: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, default_value = "csv,json,svg")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub centroids: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "shuffle,reverse,copy")]
    pub kinds: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1.0")]
    pub severities: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, default_value = "csv,json,svg")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct AttentionArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ActiveArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub centroids: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub keep_fraction: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<motion_manifold::Error>() {
            return if e.is_io() { 2 } else { 1 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.global.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
