//! Error type shared across the crate.

use std::io;
use std::path::PathBuf;

/// Errors produced by volume I/O, geometry checks, and numeric routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// File exists but does not parse as a supported NIfTI-1 volume.
    #[error("malformed volume file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    /// NIfTI datatype code other than uint8 (2), int16 (4), or float32 (16).
    #[error("unsupported NIfTI datatype code {code}")]
    UnsupportedDatatype { code: i16 },

    /// Header dimensionality other than 3.
    #[error("unsupported dimensionality {ndim}, only 3-D volumes are handled")]
    UnsupportedDimensionality { ndim: i16 },

    #[error("cannot read {path}: {source}")]
    ReadError { path: PathBuf, source: io::Error },

    #[error("cannot write {path}: {source}")]
    WriteError { path: PathBuf, source: io::Error },

    /// Operands live on different grids.
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("data length {actual} does not match voxel count {expected}")]
    DataLengthMismatch { expected: usize, actual: usize },

    #[error("invalid intensity window: low {low} must be below high {high}")]
    InvalidWindow { low: f64, high: f64 },

    /// No voxels above the foreground threshold.
    #[error("empty foreground, nothing to aggregate")]
    EmptyForeground,

    /// Normalization is impossible because the intensity spread is zero.
    #[error("degenerate intensity statistics: {0}")]
    DegenerateStats(String),

    /// Distance transform requested with no seed voxels.
    #[error("empty seed set, distances are undefined everywhere")]
    EmptySeeds,

    /// Operation needs a non-empty mask.
    #[error("empty mask: {0}")]
    EmptyMask(String),

    /// Metric has no defined value for the given inputs.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Statistical routine called with no usable observations.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Data admits no meaningful test statistic.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Argument outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Phantom description cannot be realized on the requested grid.
    #[error("infeasible phantom description: {0}")]
    SpecInfeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
