//! Command-line grammar.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "aoi", version, about = "Exact Age-of-Information distributions for two agents on one channel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact stationary distribution of a policy.
    Solve(SolveArgs),
    /// Monte-Carlo estimate of the stationary distribution.
    Simulate(SimulateArgs),
    /// Average-AoI optimal policy by policy iteration.
    Optimal(OptimalArgs),
    /// MaxWeight against the optimal policy over a grid of (p, q).
    Sweep(SweepArgs),
    /// Consistency checks on one solution.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Grid,
    Csv,
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Grid => "grid",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Where a policy comes from: `mw`, `op`, or `file:PATH`.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySource {
    MaxWeight,
    Optimal,
    File(PathBuf),
}

impl FromStr for PolicySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mw" => Ok(PolicySource::MaxWeight),
            "op" => Ok(PolicySource::Optimal),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(PolicySource::File(PathBuf::from(path))),
                _ => Err(format!("expected `mw`, `op` or `file:PATH`, got {s:?}")),
            },
        }
    }
}

impl std::fmt::Display for PolicySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicySource::MaxWeight => f.write_str("mw"),
            PolicySource::Optimal => f.write_str("op"),
            PolicySource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Success probability of agent 1.
    #[arg(long, default_value_t = 0.6)]
    pub p: f64,
    /// Success probability of agent 2.
    #[arg(long, default_value_t = 0.2)]
    pub q: f64,
}

/// Policy-iteration settings, used whenever an optimal policy is computed.
#[derive(Debug, Clone, Args)]
pub struct IterationArgs {
    /// Saturation level N of the MDP.
    #[arg(long = "n", default_value_t = 256)]
    pub n_trunc: u32,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also write the JSON summary to this file.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value = "mw")]
    pub policy: PolicySource,
    /// Grid size ŷ.
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    #[command(flatten)]
    pub iteration: IterationArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value = "mw")]
    pub policy: PolicySource,
    /// Side of the recorded grid.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = aoi_core::sim::DEFAULT_BURN_IN)]
    pub burn_in: u64,
    /// Grid file to compare the sampled grid against.
    #[arg(long)]
    pub diff_against: Option<PathBuf>,
    /// Where to write |reference − sampled|; defaults to `<out>.diff`.
    #[arg(long)]
    pub diff_out: Option<PathBuf>,
    #[command(flatten)]
    pub iteration: IterationArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimalArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub iteration: IterationArgs,
    /// Grid size used to evaluate both policies exactly.
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    /// MW/OP overlay grid; defaults to `<out>.overlay`.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepPolicy {
    /// MaxWeight only.
    Mw,
    /// MaxWeight and the optimal policy.
    Op,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Values of p: `start:step:end` or a single number.
    #[arg(long)]
    pub p: String,
    #[arg(long)]
    pub q: String,
    #[arg(long, value_enum, default_value = "op")]
    pub policy: SweepPolicy,
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    #[command(flatten)]
    pub iteration: IterationArgs,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Also write the gain surface grid to this file.
    #[arg(long)]
    pub surface: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value = "mw")]
    pub policy: PolicySource,
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    /// Checks to run, comma separated, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub check: Vec<String>,
    /// Saturation level of the power-iteration reference chain.
    #[arg(long, default_value_t = 120)]
    pub oracle_n: u32,
    #[command(flatten)]
    pub iteration: IterationArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// `start:step:end`, inclusive of `end` within 1e-12, or one number.
/// Values are rounded to 12 decimals so `0.1:0.1:0.9` yields `0.3`, not
/// `0.30000000000000004`.
pub fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad number {s:?} in range {text:?}: {e}"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [start, step, end] => {
            let (start, step, end) = (num(start)?, num(step)?, num(end)?);
            if step.is_nan() || step <= 0.0 || !start.is_finite() || !end.is_finite() {
                return Err(format!("range {text:?} needs a positive step and finite bounds"));
            }
            if end < start - 1e-12 {
                return Err(format!("range {text:?} is empty"));
            }
            let count = ((end - start) / step + 1e-12).floor() as usize + 1;
            Ok((0..count).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect())
        }
        _ => Err(format!("range {text:?} must be `start:step:end` or a number")),
    }
}
