//! Benchmark harness for `mbo-core`: synthetic problems, the
//! random-search-normalized score (RSNS), coordinate-descent configuration
//! search and the `mbo` command line.

pub mod cd;
pub mod cli;
pub mod config;
pub mod problems;
pub mod rsns;
pub mod runner;
pub mod suite;
pub mod trace;

use mbo_core::loops::LoopError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate RSNS scale: v0 = {v0}, v1 = {v1}")]
    DegenerateScale { v0: f64, v1: f64 },
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Errors caused by the user's input rather than by the run.
    pub fn is_config(&self) -> bool {
        matches!(self, BenchError::Config(_) | BenchError::Loop(LoopError::Config(_)))
    }
}
