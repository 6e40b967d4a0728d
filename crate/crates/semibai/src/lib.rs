//! File formats, experiment orchestration, and the `semibai` command line.
//!
//! The algorithms themselves live in `semibai-core`; this crate adds
//! everything that needs an operating system: CSV/JSON readers and writers
//! ([`io`]), the batch experiment runner with per-run logs and summary tables
//! ([`harness`]), and the CLI ([`cli`]).

pub mod cli;
pub mod harness;
pub mod io;

use std::path::PathBuf;

/// Errors from configuration, file handling, and experiment execution.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] semibai_core::Error),
    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    /// At least one run crashed; the output directory holds a partial-results
    /// marker describing which.
    #[error("{failed} of {total} runs failed; partial results marked in {out_dir}")]
    Partial { failed: usize, total: usize, out_dir: PathBuf },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code: 3 when results are partial, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Partial { .. } => 3,
            _ => 2,
        }
    }
}
