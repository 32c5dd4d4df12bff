//! `hytarget`: fit ranking-calibrated targeting weights, score households,
//! and run replication experiments from the command line.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hytarget", version, about)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

/// Flags every subcommand accepts.
#[derive(Clone, Debug, Args)]
pub struct Shared {
    /// Seed from which all randomness of the run derives.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// TOML configuration (model, prior, mcmc, plan and generate sections).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (for `update`, the prior file to write).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic population with known truth.
    Generate,
    /// Fit weights to community rankings (or a baseline).
    Fit(FitArgs),
    /// Score census households with fitted coefficients.
    Score(ScoreArgs),
    /// Run the replication experiment on a split dataset.
    Evaluate(EvaluateArgs),
    /// Turn a saved posterior into priors for a later period.
    Update(UpdateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    Hybrid,
    Probit,
    Pmt,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub census: Option<PathBuf>,
    #[arg(long)]
    pub rankings: Option<PathBuf>,
    #[arg(long)]
    pub quotas: Option<PathBuf>,
    /// Survey expenditure; required by the auxiliary model and by `pmt`.
    #[arg(long)]
    pub survey: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FitMethod::Hybrid)]
    pub method: FitMethod,
    /// Fit on raw covariates. By default continuous covariates are divided
    /// by twice their sd first and the divisors written to scaling.csv.
    #[arg(long)]
    pub raw: bool,
    /// Also write every retained draw to samples.csv.
    #[arg(long)]
    pub samples: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub census: Option<PathBuf>,
    /// coefficients.csv written by `fit`.
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
    /// Per-community quotas; when given, selections are marked.
    #[arg(long)]
    pub quotas: Option<PathBuf>,
    /// scaling.csv written by `fit`; defaults to the one beside
    /// --coefficients when present.
    #[arg(long)]
    pub scaling: Option<PathBuf>,
    /// Set the weights of elite-connection covariates to zero.
    #[arg(long)]
    pub drop_elite: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory with census.csv, rankings.csv, quotas.csv, splits.csv and
    /// optionally survey.csv and truth.csv.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Plan configuration; overrides --config.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Use raw covariates instead of standardizing them first.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct UpdateArgs {
    /// samples.csv written by `fit --samples`.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long, default_value_t = hytarget::update::DEFAULT_INFLATION)]
    pub inflation: f64,
    #[arg(long, default_value_t = hytarget::update::DEFAULT_SHRINK)]
    pub shrink: f64,
    /// Period the new prior is meant for.
    #[arg(long, default_value_t = 2)]
    pub period: u32,
}

/// Why a command failed, which decides the exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// Bad flags, missing inputs or an invalid configuration (exit 2).
    #[error("{0}")]
    Usage(String),
    /// The computation itself failed (exit 1).
    #[error(transparent)]
    Runtime(#[from] hytarget::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate => commands::generate(&cli.shared),
        Command::Fit(a) => commands::fit(&cli.shared, a),
        Command::Score(a) => commands::score(&cli.shared, a),
        Command::Evaluate(a) => commands::evaluate(&cli.shared, a),
        Command::Update(a) => commands::update(&cli.shared, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
