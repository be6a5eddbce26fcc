//! `ecf-toolkit`: command-line front end of the ecf-toolkit library.
//!
//! Exit status 0 on success, 1 when a table fails validation or a check
//! fails (the JSON report goes to standard output), 2 on input errors.

mod commands;
mod options;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use options::Options;

#[derive(Parser, Debug)]
#[command(name = "ecf-toolkit", version, about = "Extremal coefficient functions of max-stable processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a table is a valid extremal coefficient function.
    Validate(Options),
    /// Tawn-Molchanov coefficients of a table, optionally of a sub-vector.
    Tau(Options),
    /// Build a table from a model, a spectral measure or a tau table.
    Ecf(Options),
    /// Draw replicates of the Tawn-Molchanov or max-linear process.
    Simulate(Options),
    /// Estimate extremal coefficients from replicates.
    Estimate(Options),
    /// Apply a Bernstein function or take a convex combination.
    Transform(Options),
    /// Dependency-set polytope: halfspaces, vertices, support function.
    Depset(Options),
    /// Sharp lower bounds on the joint distribution function.
    Bound(Options),
    /// Run the property suites on a table.
    Check(Options),
}

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input, exit status 2.
    Input(String),
    /// Validation or check failure with its JSON report, exit status 1.
    Failed(Value),
}

impl From<ecf_toolkit::Error> for CliError {
    fn from(e: ecf_toolkit::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, opts): (fn(&Options) -> Result<(), CliError>, Options) = match cli.command {
        Command::Validate(o) => (commands::validate, o),
        Command::Tau(o) => (commands::tau, o),
        Command::Ecf(o) => (commands::ecf, o),
        Command::Simulate(o) => (commands::simulate, o),
        Command::Estimate(o) => (commands::estimate, o),
        Command::Transform(o) => (commands::transform, o),
        Command::Depset(o) => (commands::depset, o),
        Command::Bound(o) => (commands::bound, o),
        Command::Check(o) => (commands::check, o),
    };
    match execute(run, opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failed(report)) => {
            print!("{}", ecf_toolkit::io::to_json_string(&report));
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("ecf-toolkit: {msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(run: fn(&Options) -> Result<(), CliError>, opts: Options) -> Result<(), CliError> {
    let opts = opts.resolve()?;
    match opts.thread_count()? {
        None => run(&opts),
        Some(0) => Err(CliError::Input("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Input(e.to_string()))?
            .install(|| run(&opts)),
    }
}
