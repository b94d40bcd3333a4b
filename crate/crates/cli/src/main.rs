mod cli;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Outputs were written but a fit did not converge (or too few did).
    ConvergenceShortfall,
}

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Core(mslope::Error),
    Other(String),
}

impl From<mslope::Error> for CliError {
    fn from(e: mslope::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(mslope::Error::Io(e))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(format!("csv output failed: {e}"))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use mslope::Error as E;
        match self {
            CliError::Invalid(_) => 2,
            CliError::Core(E::InvalidInput(_) | E::DimensionMismatch { .. } | E::Parse { .. } | E::Io(_) | E::Json(_)) => 2,
            CliError::Core(E::Convergence { .. }) => 3,
            CliError::Core(E::Numeric(_)) | CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(msg) => write!(f, "invalid input: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Other(msg) => f.write_str(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit {
            data,
            num_classes,
            standardize,
            overrides,
        } => commands::fit(data, num_classes, standardize, &overrides),
        Command::Simulate { overrides } => commands::simulate(&overrides),
        Command::Scaling { overrides } => commands::scaling(&overrides),
        Command::Rademacher { overrides } => commands::rademacher(&overrides),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ConvergenceShortfall) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
