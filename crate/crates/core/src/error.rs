use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: X has {x_cols} columns, Y has {y_cols}")]
    DimensionMismatch { x_cols: usize, y_cols: usize },

    #[error("matrix values length {found} does not match {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        found: usize,
    },

    #[error("matrix must have at least {required} rows, found {rows}")]
    TooFewRows { rows: usize, required: usize },

    #[error("matrix must have at least one column")]
    NoColumns,

    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("bootstrap size must be at least 1")]
    InvalidBootstrapSize,

    #[error("multiplier vector has length {found}, expected {expected}")]
    MultiplierLength { expected: usize, found: usize },

    #[error("invalid region [{start}, {end}) for dimension {p}")]
    InvalidRegion { start: usize, end: usize, p: usize },

    #[error("region [{start}, {end}) is too short to split")]
    Unsplittable { start: usize, end: usize },

    #[error("overlapping segments [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    OverlappingSegments {
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("experiment requires at least one Monte Carlo run")]
    EmptyExperiment,

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error comes from settings rather than from the data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Self::Config(_)
                | Self::InvalidAlpha(_)
                | Self::InvalidBootstrapSize
                | Self::EmptyExperiment
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
