//! `grda`: data generation, embedding pretraining, training, evaluation,
//! equilibrium checks and reports for graph-relational domain adaptation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grda_core::GrdaError;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Divergence(String),
    Verdict(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Verdict(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Divergence(m) | CliError::Verdict(m) => f.write_str(m),
        }
    }
}

impl From<GrdaError> for CliError {
    fn from(e: GrdaError) -> Self {
        match e {
            GrdaError::Divergence { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "grda", version, about = "Graph-relational domain adaptation toolkit")]
struct Cli {
    /// Print progress to stderr; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Default output directory.
    #[arg(long, env = "GRDA_OUT", default_value = "grda-out", global = true)]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate or import a dataset.
    #[command(subcommand)]
    GenData(GenData),
    /// Fit node embeddings to a dataset's domain graph.
    PretrainEmbed(PretrainArgs),
    /// Train one method on a dataset directory.
    Train(TrainArgs),
    /// Score checkpoints per domain.
    Eval(EvalArgs),
    /// Check equilibrium conditions on an analytic or learned density.
    VerifyTheory(VerifyArgs),
    /// Summaries and figures from metric tables.
    Report(ReportArgs),
    /// Every method and seed of a manifest, then a report.
    RunExperiment(ExperimentArgs),
}

#[derive(Subcommand, Debug)]
enum GenData {
    /// Rotating two-Gaussian domains on a random unit-circle graph.
    Dg(DgArgs),
    /// Monthly state temperatures with a source/target split.
    Tpt(TptArgs),
}

#[derive(Args, Debug)]
struct DgArgs {
    #[arg(long, default_value_t = 15)]
    domains: usize,
    #[arg(long, default_value_t = 100)]
    per_domain: usize,
    #[arg(long, default_value_t = 6)]
    sources: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TptArgs {
    /// CSV with header state,year,m1..m12.
    #[arg(long)]
    csv: PathBuf,
    /// Split JSON, or `ew` / `ns` for the bundled splits.
    #[arg(long)]
    split: String,
}

#[derive(Args, Debug)]
struct PretrainArgs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// grda, dann or source-only.
    #[arg(long, default_value = "grda")]
    method: String,
    /// JSON file with training settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, allow_negative_numbers = true)]
    lambda_d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lr: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lr_disc: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Embedding CSV; pretrained from the graph when absent.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    checkpoint: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// JSON with a graph and per-domain bin masses.
    #[arg(long, conflicts_with_all = ["checkpoint", "data"])]
    analytic: Option<PathBuf>,
    #[arg(long, requires = "data")]
    checkpoint: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-6, allow_negative_numbers = true)]
    tol: f64,
    /// Histogram bins per axis for learned encodings.
    #[arg(long, default_value_t = 32)]
    bins: usize,
    /// Accept unequal domain sizes by weighting the domain prior.
    #[arg(long)]
    reweight: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Dataset directory supplying the graph and split.
    #[arg(long)]
    data: PathBuf,
    /// Metric table JSON files written by `eval`.
    #[arg(long, required = true, num_args = 1..)]
    tables: Vec<PathBuf>,
    /// History CSVs for the convergence figure.
    #[arg(long, num_args = 1..)]
    history: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Override one training setting, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
