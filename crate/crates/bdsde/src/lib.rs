//! Command-line front end, problem files and output formats for
//! [`bdsde_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

pub mod cli;
pub mod config;
pub mod expr;
pub mod noise_io;
pub mod output;
pub mod pool;

pub use pool::RayonExecutor;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] bdsde_core::Error),
    /// A run that completed but whose checks failed.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 1 for numerical failures, 2 for anything the caller got wrong.
    pub fn exit_code(&self) -> i32 {
        use bdsde_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(E::NonConvergence { .. } | E::NonFinite { .. } | E::Rung { .. } | E::Provenance) => 1,
            CliError::Core(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}
