use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::FileConfig;

/// Memory-word length estimation experiments.
#[derive(Debug, Parser)]
#[command(name = "memword", version)]
struct Cli {
    /// JSON file supplying default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a process and write its sample path.
    Simulate(SimulateArgs),
    /// Evaluate the order estimator along a checkpoint schedule.
    Estimate(EstimateArgs),
    /// Build the staged relabeling adversary against a plug-in estimator.
    Adversary(AdversaryArgs),
    /// Exact memory-word analysis of an explicit chain.
    Oracle(OracleArgs),
    /// Tabulate probability bounds.
    Bound(BoundArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct ProcessArgs {
    /// Built-in process: ryabko, ryabko-f0, even.
    #[arg(long)]
    pub process: Option<String>,
    /// Explicit chain specification (JSON).
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Stage plan (JSON); simulates its final relabeled process.
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct EstimatorArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    /// Number of symbols to write (horizon plus one).
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Sequence file to analyze.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Simulate instead of reading a file (one run per seed).
    #[command(flatten)]
    pub process: ProcessArgs,
    /// Symbols per simulated run (default: last checkpoint plus one).
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AdversaryArgs {
    /// Plug-in estimator under attack: shortest-word, chi, never-one.
    #[arg(long)]
    pub plugin: Option<String>,
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Confidence margin added to each stage target (default: Hoeffding at 5%).
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest horizon tried by a stage search.
    #[arg(long)]
    pub cap: Option<usize>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Stage plan JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-stage search CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Optional sample path; reports the memory length of its suffix.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[command(subcommand)]
    pub kind: BoundKind,
}

#[derive(Debug, Clone, Subcommand)]
pub enum BoundKind {
    /// Error bound on P(chi_n > K) over a grid of horizons.
    Chi {
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Hoeffding's inequality for n variables of a common range width.
    Hoeffding {
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        width: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match cli.config.as_deref().map(FileConfig::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a, &file),
        Command::Estimate(a) => commands::estimate(&a, &file),
        Command::Adversary(a) => commands::adversary(&a, &file),
        Command::Oracle(a) => commands::oracle(&a, &file),
        Command::Bound(a) => commands::bound(&a, &file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
