//! Orchestration for the `abc` binary: `build`, `verify` and `compare`.

pub mod build;
pub mod compare;
pub mod config;
mod io;
pub mod plot;
pub mod report;
pub mod verify;

use std::path::PathBuf;

use thiserror::Error;

pub use build::{cmd_build, BuildOutcome};
pub use compare::{cmd_compare, CompareReport};
pub use config::{LSchedule, Overrides, RunConfig};
pub use report::{RunReport, Verdict};
pub use verify::{cmd_verify, VerifyReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("stage {stage}: {msg}")]
    Stage { stage: usize, msg: String },
    #[error("incompatible builds: {0}")]
    Incompatible(String),
}

impl CliError {
    pub(crate) fn stage(stage: usize) -> impl Fn(&dyn std::fmt::Display) -> CliError {
        move |e| CliError::Stage { stage, msg: e.to_string() }
    }
}

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const VERDICT_FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
}
