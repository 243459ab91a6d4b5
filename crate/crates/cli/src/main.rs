use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use redispatch_cli::config::RunConfig;
use redispatch_cli::{commands, experiments, CliError};

/// Energy network re-dispatch as a QUBO: build instances, solve them and run the
/// experiment suite.
#[derive(Debug, Parser)]
#[command(name = "redispatch", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML file whose settings override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunConfig,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an instance from a network export and write it with its objective QUBO.
    BuildInstance(Common),
    /// Minimize the objective of one instance.
    Solve(Common),
    /// Run one of the experiments.
    Experiment {
        #[arg(value_enum)]
        kind: Experiment,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the sensitivity matrix of a network export.
    EstimateSensitivity(Common),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    PenaltyNorm,
    ScoreNorm,
    Decomposers,
    Timeseries,
}

fn effective(common: &Common) -> Result<RunConfig, CliError> {
    match &common.config {
        Some(path) => Ok(common.run.clone().overlay(&RunConfig::from_toml_file(path)?)),
        None => Ok(common.run.clone()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BuildInstance(c) => commands::build_instance(&effective(&c)?),
        Command::Solve(c) => commands::solve(&effective(&c)?),
        Command::EstimateSensitivity(c) => commands::estimate_sensitivity(&effective(&c)?),
        Command::Experiment { kind, common } => {
            let cfg = effective(&common)?;
            match kind {
                Experiment::PenaltyNorm => experiments::penalty_norm(&cfg),
                Experiment::ScoreNorm => experiments::score_norm(&cfg),
                Experiment::Decomposers => experiments::decomposers(&cfg),
                Experiment::Timeseries => experiments::timeseries(&cfg),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("redispatch: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
