//! `moran-assort`: batch front-end for the multilocus assortative-mating model.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 runtime failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Overrides, Status};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

const THREADS_VAR: &str = "MORAN_ASSORT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "moran-assort", version, about = "Moran model with multilocus assortative mating")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Moran chain trajectories, one CSV per replica.
    Simulate(RunArgs),
    /// Diffusion paths, one CSV per replica.
    Sde(RunArgs),
    /// Stationary density on a regular grid.
    Density(DensityArgs),
    /// Critical points of the stationary density.
    CriticalPoints(BaseArgs),
    /// Built-in verification suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct BaseArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Master seed, overriding `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replica count, overriding `run.replicas`.
    #[arg(long)]
    replicas: Option<u64>,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Points per axis.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Suite to run; repeat for several, omit for all.
    #[arg(long = "suite")]
    suites: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load(base: &BaseArgs) -> CliResult<(ExperimentConfig, PathBuf)> {
    let config = ExperimentConfig::load(&base.config)?;
    let out = base
        .out
        .clone()
        .or_else(|| config.output.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set output in the config".into()))?;
    Ok((config, out))
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer (got {raw:?})")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: Cli) -> CliResult<(Status, PathBuf)> {
    configure_threads()?;
    let (status, out) = match cli.command {
        Command::Simulate(a) => {
            let (config, out) = load(&a.base)?;
            let over = Overrides { seed: a.seed, replicas: a.replicas };
            (commands::cmd_simulate(config, &out, &over)?, out)
        }
        Command::Sde(a) => {
            let (config, out) = load(&a.base)?;
            let over = Overrides { seed: a.seed, replicas: a.replicas };
            (commands::cmd_sde(config, &out, &over)?, out)
        }
        Command::Density(a) => {
            let (config, out) = load(&a.base)?;
            (commands::cmd_density(config, &out, a.grid)?, out)
        }
        Command::CriticalPoints(a) => {
            let (config, out) = load(&a)?;
            (commands::cmd_critical_points(config, &out)?, out)
        }
        Command::Verify(a) => (commands::cmd_verify(&a.suites, &a.out, a.seed)?, a.out),
    };
    Ok((status, out))
}

fn report_done(out: &Path) {
    eprintln!("wrote {}", out.join(output::MANIFEST_NAME).display());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((status, out)) => {
            report_done(&out);
            match status {
                Status::Ok => ExitCode::SUCCESS,
                Status::VerificationFailed => ExitCode::from(1),
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
