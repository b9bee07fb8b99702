use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Integrates and diagnoses penalty-regularized forward-backward flows.
#[derive(Debug, Parser)]
#[command(name = "penflow", version)]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = "PENFLOW_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a configured run and write the trajectory CSV and report JSON.
    Run { config: PathBuf },
    /// Print the schedule hypothesis report as JSON.
    Check { config: PathBuf },
    /// Compare unit-step Euler with the discrete scheme over N steps.
    CompareDiscrete {
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, hide = true, default_value_t = 0)]
        lambda_shift: usize,
    },
    /// Recompute diagnostics for a previously written trajectory CSV.
    Diagnose { config: PathBuf, trajectory: PathBuf },
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Error = 1,
    HypothesisFailure = 2,
    Unverifiable = 3,
}

fn main() -> ExitCode {
    // Usage errors exit with 1; 2 is reserved for hypothesis failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(Status::Error as u8) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run { config } => commands::run(config, &cli.out_dir),
        Command::Check { config } => commands::check(config),
        Command::CompareDiscrete { config, n, lambda_shift } => {
            commands::compare_discrete(config, &cli.out_dir, *n as usize, *lambda_shift)
        }
        Command::Diagnose { config, trajectory } => commands::diagnose(config, trajectory, &cli.out_dir),
    };
    let status = result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        Status::Error
    });
    ExitCode::from(status as u8)
}
