//! Command-line driver for the flow-typed code-graph model.
//!
//! One subcommand per workflow stage: `graph` turns MiniLang sources into
//! graph JSON plus corpus statistics, `train` fits the program classifier,
//! `clone` fits the pair-similarity scorer, `eval` re-scores a saved
//! checkpoint, `gradcheck` audits the analytic gradients against finite
//! differences, and `ablate` sweeps model variants over one manifest.
//!
//! Machine-readable results always land in UTF-8 JSON files; stdout keeps
//! a short human summary and stderr the diagnostics. The process exits 0
//! on success, 2 when a named input file is absent, and 1 for any other
//! failure. Training randomness (parameter draws and epoch shuffles) is
//! governed by `--seed`, while dataset splits follow the seed recorded in
//! the manifest, so evaluation always sees the same split the training
//! run held out.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mfgnn_core::nn::Hyper;
use mfgnn_core::train::TrainOptions;

#[derive(Parser)]
#[command(name = "mfgnn", version, about = "Flow-typed code graphs and the model that learns on them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert MiniLang sources into graph JSON plus corpus statistics
    Graph(GraphArgs),
    /// Train the program classifier and save a checkpoint
    Train(FitArgs),
    /// Train the clone scorer on a pair manifest and save a checkpoint
    Clone(FitArgs),
    /// Score a saved checkpoint on one split of a manifest
    Eval(EvalArgs),
    /// Compare analytic gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Train and score a set of model variants side by side
    Ablate(AblateArgs),
}

/// Model widths; the defaults match the reference configuration.
#[derive(Args, Clone, Copy)]
struct HyperArgs {
    /// Token embedding width
    #[arg(long, default_value_t = 50)]
    embed: usize,
    /// Block-feature and message width
    #[arg(long, default_value_t = 200)]
    hidden: usize,
    /// Message-passing layers
    #[arg(long, default_value_t = 3)]
    layers: usize,
}

impl HyperArgs {
    fn to_hyper(self) -> Hyper {
        Hyper { embed_dim: self.embed, hidden_dim: self.hidden, layers: self.layers }
    }
}

/// Optimization schedule shared by the fitting commands.
#[derive(Args, Clone, Copy)]
struct ScheduleArgs {
    /// Seed for parameter draws and epoch shuffles
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Passes over the training split
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Samples per optimizer step
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Adamax step size
    #[arg(long, default_value_t = 0.002)]
    lr: f64,
    /// Stop early once the training-split score reaches this value
    #[arg(long, value_name = "SCORE")]
    stop_at: Option<f64>,
}

impl ScheduleArgs {
    fn to_options(self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            batch_size: self.batch,
            learning_rate: self.lr,
            seed: self.seed,
            stop_at_train_score: self.stop_at,
        }
    }
}

#[derive(Args)]
struct GraphArgs {
    /// MiniLang source files
    inputs: Vec<PathBuf>,
    /// Directory receiving one graph JSON per source plus stats.json
    #[arg(long, default_value = "graphs")]
    out: PathBuf,
}

/// Arguments shared by `train` and `clone`; only the manifest task and
/// the trained head differ.
#[derive(Args)]
struct FitArgs {
    /// Dataset manifest (JSON lines)
    manifest: PathBuf,
    /// Checkpoint directory to write
    #[arg(long, default_value = "checkpoint")]
    out: PathBuf,
    /// Metrics report path; defaults to metrics.json inside the checkpoint
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Variant selection file; omitted means the full default pipeline
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset manifest (JSON lines)
    manifest: PathBuf,
    /// Checkpoint directory written by `train` or `clone`
    #[arg(long)]
    checkpoint: PathBuf,
    /// Metrics report path
    #[arg(long, default_value = "metrics.json")]
    metrics: PathBuf,
    /// Part of the manifest to score
    #[arg(long, value_enum, default_value_t = Split::Test)]
    split: Split,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Split {
    Train,
    Val,
    Test,
    All,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::All => "all",
        }
    }
}

#[derive(Args)]
struct GradcheckArgs {
    /// Seed for the audited parameter and input draws
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Optional JSON report with one row per stage
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    /// Dataset manifest; its task picks the classifier or the clone scorer
    manifest: PathBuf,
    /// Variant selection files, one table row each; none means the default
    /// pipeline only
    #[arg(long = "config", value_name = "FILE")]
    configs: Vec<PathBuf>,
    /// JSON report with one row per variant
    #[arg(long, default_value = "ablation.json")]
    out: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Graph(args) => commands::graph(args),
        Command::Train(args) => commands::train(args),
        Command::Clone(args) => commands::clone_pairs(args),
        Command::Eval(args) => commands::eval(args),
        Command::Gradcheck(args) => commands::gradcheck(args),
        Command::Ablate(args) => commands::ablate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.status())
        }
    }
}
