//! Experiment runner, data ingestion, and exports for the covsel library.

pub mod config;
pub mod io;
pub mod record;
pub mod runner;

use std::fmt;

pub use config::ExperimentConfig;
pub use io::{load_matrix_csv, parse_matrix_csv, GraphExport, LoadedMatrix};
pub use record::ResultRecord;
pub use runner::{run_case_study, run_experiment};

/// Top-level failure classes, mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration (exit 2).
    Config(String),
    /// Unreadable or malformed input data, or an output I/O failure (exit 3).
    Data(String),
    /// Solver or linear-algebra failure (exit 4).
    Numeric(String),
}

impl CliError {
    pub fn from_numeric(e: covsel::Error) -> Self {
        CliError::Numeric(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
