//! Command-line front end: ingestion, configuration, reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod instance;
pub mod report;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slaforge_core::metrics::EquityKind;
use slaforge_core::search::{PolicyClass, Sampler};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "slaforge", version, about = "Design and evaluate inspection SLAs and budget policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the stylized queueing design problem for one or more weightings.
    Solve(SolveArgs),
    /// Simulate one policy on historical traces and report its losses.
    Simulate(SimulateArgs),
    /// Search for Pareto-efficient policies.
    Search(SearchArgs),
    /// Re-evaluate front policies on other traces, relative to a baseline.
    Evaluate(EvaluateArgs),
    /// Generate synthetic Poisson traces from an instance.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// CSV with header `category,borough,lambda,risk`.
    #[arg(long)]
    pub instance: PathBuf,
    /// Total inspection budget per day.
    #[arg(long)]
    pub budget: f64,
    /// Tail parameter; defaults to -ln(0.05).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Efficiency weight.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Solve for every weight in `start:end:step` instead.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Directory for report.json; printed to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EquityArg {
    Range,
    MaxCost,
}

impl From<EquityArg> for EquityKind {
    fn from(v: EquityArg) -> Self {
        match v {
            EquityArg::Range => EquityKind::Range,
            EquityArg::MaxCost => EquityKind::MaxCost,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ClassArg {
    Borough,
    City,
}

impl From<ClassArg> for PolicyClass {
    fn from(v: ClassArg) -> Self {
        match v {
            ClassArg::Borough => PolicyClass::BoroughBudget,
            ClassArg::City => PolicyClass::CityBudget,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SamplerArg {
    SobolRandom,
    Evolutionary,
}

impl From<SamplerArg> for Sampler {
    fn from(v: SamplerArg) -> Self {
        match v {
            SamplerArg::SobolRandom => Sampler::SobolRandom,
            SamplerArg::Evolutionary => Sampler::Evolutionary,
        }
    }
}

/// Flags overriding the `[simulation]` and `[metrics]` config sections.
#[derive(Debug, Default, Args)]
pub struct SimOverrides {
    #[arg(long)]
    pub review_period: Option<u32>,
    /// FCFS violation in [0, 1].
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub repeats: Option<u32>,
    #[arg(long)]
    pub percentile: Option<f64>,
    #[arg(long)]
    pub drop_cost: Option<f64>,
    #[arg(long, value_enum)]
    pub equity: Option<EquityArg>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub arrivals: PathBuf,
    #[arg(long)]
    pub capacity: PathBuf,
    /// CSV with header `kind,category,borough,value`.
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: SimOverrides,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub arrivals: PathBuf,
    #[arg(long)]
    pub capacity: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub class: Option<ClassArg>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,
    #[arg(long)]
    pub seeds_per_policy: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: SimOverrides,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// `front_policies.csv` written by `search`.
    #[arg(long)]
    pub front: PathBuf,
    #[arg(long)]
    pub arrivals: PathBuf,
    #[arg(long)]
    pub capacity: PathBuf,
    /// Policy CSV to report ratios against.
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: SimOverrides,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub budget: f64,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub days: usize,
    /// Mean daily capacity as a fraction of the budget, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub utilization: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Calendar date of the first day.
    #[arg(long, default_value = "2019-01-01")]
    pub start: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Solve(a) => commands::solve(a, out),
        Command::Simulate(a) => commands::simulate(a, out),
        Command::Search(a) => commands::search(a, out),
        Command::Evaluate(a) => commands::evaluate(a, out),
        Command::Synth(a) => commands::synth(a, out),
    }
}
