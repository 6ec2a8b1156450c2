//! `entropic`: run, sample, transform and verify entropic quantum dynamics
//! scenarios.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid
//! configuration or input, 3 numerical abort.

mod commands;
mod config;
mod error;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::io::{create_dir, write_json};

#[derive(Parser)]
#[command(name = "entropic", version, about = "Entropic quantum dynamics scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial state and write snapshots, a step log and a manifest.
    Evolve(Common),
    /// Evolve Ψ together with a walker ensemble.
    Sample(Common),
    /// Transform the snapshots of an `evolve` run into a moving frame.
    Transform {
        #[command(flatten)]
        common: Common,
        /// Directory written by `evolve`.
        #[arg(long)]
        run: PathBuf,
    },
    /// Run the configured checks and write one JSON report per check.
    Verify(Common),
    /// First-order versus exact proper-time defect of the trajectory.
    ProperTime(Common),
}

fn run(command: Command) -> Result<(), CliError> {
    let common = match &command {
        Command::Evolve(c) | Command::Sample(c) | Command::Verify(c) | Command::ProperTime(c) => c,
        Command::Transform { common, .. } => common,
    };
    let mut config = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.output.clone())
        .ok_or_else(|| CliError::Config("output: no output directory (use --out)".into()))?;
    let base = common.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let scenario = config.build(&base)?;
    create_dir(&out)?;
    let (manifest, failed) = match &command {
        Command::Evolve(_) => (commands::evolve(&scenario, &out)?, vec![]),
        Command::Sample(_) => (commands::sample(&scenario, &out)?, vec![]),
        Command::Transform { run, .. } => (commands::transform(&scenario, run, &out)?, vec![]),
        Command::Verify(_) => commands::verify(&scenario, &base, &out)?,
        Command::ProperTime(_) => (commands::proper_time(&scenario, &base, &out)?, vec![]),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = match &cli.command {
        Command::Evolve(c) | Command::Sample(c) | Command::Verify(c) | Command::ProperTime(c) => c.quiet,
        Command::Transform { common, .. } => common.quiet,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "info" }))
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
