use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "pickfreeze",
    version,
    about = "Pick-freeze estimation of closed Sobol indices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the table here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Point estimates and confidence intervals for each subset.
    Estimate(EstimateArgs),
    /// Test a hypothesis on the indices, once or over replicates.
    Test(TestArgs),
    /// Rejection frequency over a grid of the model parameter.
    Power(PowerArgs),
    /// Bennett deviation bounds over (n, y) grids.
    Concentration(ConcentrationArgs),
    /// Berry-Esseen coverage bracket of the centered estimator.
    Berry(BerryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// ishigami, ishigami-centered, example1, example2 or breguet.
    #[arg(long, default_value = "ishigami")]
    pub model: String,
    /// TOML file with a [model] table and an optional [design] table.
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    /// Parameter of the Gaussian examples.
    #[arg(long)]
    pub lambda1: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Subset as a comma list of 1-based inputs; repeat for a design.
    #[arg(long = "u")]
    pub u: Vec<String>,
    /// Sample size; repeat for several.
    #[arg(long = "n")]
    pub n: Vec<usize>,
    #[arg(long, env = "PICKFREEZE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// S, T, full or tilde.
    #[arg(long, default_value = "T")]
    pub estimator: String,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Known output mean for the tilde estimator; estimated when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub mean: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Left subsets of the differences S^v - S^w.
    #[arg(long = "v")]
    pub v: Vec<String>,
    /// Right subsets, paired with --v.
    #[arg(long = "w")]
    pub w: Vec<String>,
    /// t1..t5 or linear.
    #[arg(long, default_value = "linear")]
    pub stat: String,
    /// Coefficients of the linear statistic; all ones when absent.
    #[arg(long = "A", value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// S or T.
    #[arg(long, default_value = "S")]
    pub estimator: String,
    /// Use sigma0^2 I as null covariance instead of the plug-in one.
    #[arg(long)]
    pub sigma0: Option<f64>,
    /// Test A S <= shift (linear statistic only).
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<f64>,
    /// Report the rejection frequency over this many datasets.
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct PowerArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "v")]
    pub v: Vec<String>,
    #[arg(long = "w")]
    pub w: Vec<String>,
    /// Grid of lambda1 as start:stop:step.
    #[arg(long, default_value = "0:0.7:0.05")]
    pub grid: String,
    #[arg(long, default_value = "t1")]
    pub stat: String,
    #[arg(long = "A", value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = "S")]
    pub estimator: String,
    /// Null covariance sigma0^2 I; defaults to the model's null value.
    #[arg(long)]
    pub sigma0: Option<f64>,
    /// Use the plug-in covariance instead of sigma0^2 I.
    #[arg(long)]
    pub plug_in: bool,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ConcentrationArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// S, T or both.
    #[arg(long, default_value = "both")]
    pub variant: String,
    /// Grid of deviations y as start:stop:step.
    #[arg(long, default_value = "0.05:0.5:0.05")]
    pub grid: String,
    /// Bound on |Y|, or `estimate`; the model's bound when absent.
    #[arg(long)]
    pub b: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct BerryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    /// Known output mean; the model's mean when absent, else estimated.
    #[arg(long, allow_hyphen_values = true)]
    pub mean: Option<f64>,
    /// Index used to score coverage; the known index when absent.
    #[arg(long)]
    pub reference: Option<f64>,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Estimate(a) => &a.common,
            Command::Test(a) => &a.common,
            Command::Power(a) => &a.common,
            Command::Concentration(a) => &a.common,
            Command::Berry(a) => &a.common,
        }
    }
}
