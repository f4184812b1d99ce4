use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "medml", version, about = "Double machine learning for causal mediation analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate total, direct and indirect effects from a CSV file.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo study on the simulation design.
    Simulate(SimulateArgs),
    /// Run the numerical property checks of the scores.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreChoice {
    Theorem1,
    Theorem2,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaChoice {
    Toeplitz,
    Identity,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Include wall-clock timings (makes the output non-reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct EstimationArgs {
    /// Number of cross-fitting folds.
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Trimming threshold in (0, 0.5).
    #[arg(long, default_value_t = 0.05)]
    pub trim: f64,
    /// Which mediation estimator(s) to run.
    #[arg(long, value_enum, default_value_t = ScoreChoice::Both)]
    pub score: ScoreChoice,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub outcome: String,
    #[arg(long)]
    pub treatment: String,
    #[arg(long)]
    pub mediator: String,
    /// Comma-separated covariate columns; all remaining columns when omitted.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Also estimate the controlled direct effect at this mediator value (repeatable).
    #[arg(long = "controlled-m", value_parser = clap::value_parser!(u8).range(0..=1))]
    pub controlled_m: Vec<u8>,
    /// Seed of the fold assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub p: usize,
    /// Covariate coefficients are `scale / i²`.
    #[arg(long, default_value_t = 0.3)]
    pub scale: f64,
    #[arg(long, default_value_t = 250)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = SigmaChoice::Toeplitz)]
    pub sigma: SigmaChoice,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Seed of the first replication; replication r uses seed + r.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Oracle sample size.
    #[arg(long = "n-mc", default_value_t = 100_000)]
    pub n_mc: usize,
    #[arg(long, default_value_t = 20_240_901)]
    pub seed: u64,
    /// Replace the efficient score with a plug-in score in the orthogonality suite.
    #[arg(long, hide = true)]
    pub inject_non_orthogonal: bool,
    #[command(flatten)]
    pub common: Common,
}
