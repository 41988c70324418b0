//! Errors produced by the harness layer, and their process exit codes.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// The command line asks for something incoherent that argument parsing
    /// alone cannot catch, e.g. a required option missing from both the
    /// flags and the config file.
    #[error("usage: {0}")]
    Usage(String),

    /// The manifest violates its schema; the message names the offending
    /// field or entry.
    #[error("manifest: {0}")]
    Manifest(String),

    /// A file the manifest points at does not exist.
    #[error("missing artifact: {role} at {path}")]
    MissingArtifact { role: String, path: PathBuf },

    #[error("cannot split {patients} patients into {k} folds")]
    InvalidFoldCount { k: usize, patients: usize },

    /// Every case in the cohort failed; there is nothing to report.
    #[error("evaluation produced no usable records")]
    EvaluationFailed,

    #[error("could not read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("could not write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("report: {0}")]
    Report(String),

    #[error(transparent)]
    Core(#[from] voxmetric_core::Error),

    #[error("internal: {0}")]
    Internal(String),
}

impl HarnessError {
    /// Process exit code: 1 for usage errors, 2 for anything wrong with the
    /// input data or the filesystem, 3 for faults in the tool itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::Internal(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
