//! `akws`: generate synthetic task data, run class-incremental experiments,
//! check the recursion against its joint oracle and recompute metrics.
//!
//! Exit codes: 0 success, 1 runtime failure or failed oracle check,
//! 2 invalid configuration, flags or input files.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use akws_core::Activation;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "akws", version, about = "Analytic class-incremental keyword spotting experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "akws-out")]
    pub out: PathBuf,
    /// Ridge regularizer.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Expansion size E.
    #[arg(long, global = true)]
    pub expansion: Option<u32>,
    #[arg(long, global = true, value_enum)]
    pub activation: Option<ActivationArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ActivationArg {
    Identity,
    Relu,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Identity => Activation::Identity,
            ActivationArg::Relu => Activation::Relu,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic per-task feature CSVs and a manifest.
    Gen(GenArgs),
    /// Run an experiment; writes results.json, grid.csv and snapshot.akws.
    Run(SourceArgs),
    /// Compare the recursive classifier with joint training at every prefix.
    OracleCheck(OracleArgs),
    /// Recompute ACC and BWT from a grid CSV.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Base-task class count; half the classes when absent.
    #[arg(long)]
    pub base: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub per_step: usize,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
}

#[derive(Args, Debug)]
pub struct SourceArgs {
    /// Read tasks from a manifest instead of the configured data source.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Perturb the recursive weights by this fraction of their largest entry.
    #[arg(long, value_name = "SCALE")]
    pub inject_noise: Option<f64>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Grid CSV written by `run`.
    pub grid: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => commands::gen(&cli.global, &args),
        Command::Run(args) => commands::run(&cli.global, &args),
        Command::OracleCheck(args) => commands::oracle_check(&cli.global, &args),
        Command::Metrics(args) => commands::metrics(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
