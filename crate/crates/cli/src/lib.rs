//! Library half of the `drcfs` command: ingestion, configuration, sweeps,
//! and the subcommand bodies.

pub mod benchmark;
pub mod commands;
pub mod config;
pub mod ingest;

use drcfs_core::DrcfsError;

pub use config::RunConfig;
pub use ingest::{ingest_csv, IngestError, IngestOptions, OnMissing};

/// Errors carrying the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Estimation(#[from] DrcfsError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Benchmark(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Ingest(_) => 2,
            CliError::Estimation(_) => 3,
            CliError::Usage(_) => 4,
            CliError::Benchmark(_) => 5,
            CliError::Io(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
