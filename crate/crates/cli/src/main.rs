//! `steercal` command-line entry point.
//!
//! Exit codes: 0 success, 1 invalid input or flags, 2 I/O or file-format
//! failure, 3 numerical failure.

mod commands;
mod config;
mod data;
#[cfg(feature = "plot")]
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use steercal::ErrorClass;

#[derive(Parser)]
#[command(
    name = "steercal",
    version,
    about = "Probing, steering and calibration workflows over activation dumps"
)]
struct Cli {
    /// Flat TOML file with parameter defaults; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic datasets with planted directions.
    Synth(commands::synth::Args),
    /// Fit ridge probes per layer.
    Probe(commands::probe::Args),
    /// Build contrastive steering vectors per layer.
    Caa(commands::caa::Args),
    /// Fit the steering transfer function from a sweep.
    Sweep(commands::sweep::Args),
    /// Compute per-question steering strengths.
    Plan(commands::plan::Args),
    /// Calibration metrics for per-question confidences.
    Metrics(commands::metrics::Args),
    /// Probe alignment, contamination and subspace analyses.
    Geometry(commands::geometry::Args),
    /// Render report CSVs as SVG figures.
    Report(commands::report::Args),
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Validation => 1,
        ErrorClass::Io => 2,
        ErrorClass::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let file = cli.config.as_deref();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth::run(a, file),
        Command::Probe(a) => commands::probe::run(a, file),
        Command::Caa(a) => commands::caa::run(a, file),
        Command::Sweep(a) => commands::sweep::run(a, file),
        Command::Plan(a) => commands::plan::run(a, file),
        Command::Metrics(a) => commands::metrics::run(a, file),
        Command::Geometry(a) => commands::geometry::run(a, file),
        Command::Report(a) => commands::report::run(a, file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
