//! Experiment runner for `hamdelay-core`.
//!
//! Every subcommand reads an optional JSON config, writes `report.json`,
//! `timing.json` and its data files into the output directory, and maps
//! the outcome to an exit code (see [`ExitCode`]).

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{execute, Outcome};

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "HAMDELAY_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "hamdelay",
    version,
    about = "Mean-field Hamiltonian delay equation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GlobalArgs {
    /// JSON config; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the grid size of the config.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Worker threads for the ensemble; 0 means available parallelism.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Nullity of random twisted-loop operators against `2n + m`.
    OperatorEnsemble,
    /// Solve a registered system and write the loop.
    Solve,
    /// Hessian nullity of a solved critical point by both routes.
    Nullity,
    /// BOV circle, Levi-Civita transform and Kepler residual.
    Kepler,
    /// Solve a pulled-back problem and iterate it.
    Symmetry,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::OperatorEnsemble => "operator-ensemble",
            Command::Solve => "solve",
            Command::Nullity => "nullity",
            Command::Kepler => "kepler",
            Command::Symmetry => "symmetry",
        }
    }
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Passed = 0,
    CheckFailed = 1,
    Usage = 2,
    Numerical = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hamdelay_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        use hamdelay_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Csv(_) => ExitCode::Usage,
            CliError::Core(E::InvalidArgument(_)) => ExitCode::Usage,
            CliError::Core(E::Precondition(_)) => ExitCode::CheckFailed,
            CliError::Core(_) => ExitCode::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
