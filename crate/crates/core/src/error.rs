use thiserror::Error;

use crate::subset::SubsetMask;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ground set of size {0} is outside 1..={max}", max = crate::subset::MAX_SITES)]
    GroundSetSize(usize),

    #[error("duplicate site label {0:?}")]
    DuplicateLabel(String),

    #[error("invalid site label {0:?}: labels must be non-empty and must not contain ',', '[' or ']'")]
    InvalidLabel(String),

    #[error("expected {expected} coordinate rows, got {got}")]
    CoordCount { expected: usize, got: usize },

    #[error("site coordinates are required for this model")]
    MissingCoords,

    #[error("subset mask {mask:#b} does not fit a ground set of {m} sites")]
    MaskOutOfRange { mask: u32, m: usize },

    #[error("set function has {got} values, expected {expected}")]
    TableSize { expected: usize, got: usize },

    #[error("normalization violated at {subset}: expected {expected}, found {found}")]
    Normalization {
        subset: SubsetMask,
        expected: f64,
        found: f64,
    },

    #[error("ground sets differ")]
    GroundSetMismatch,

    #[error("invalid extremal coefficient function: {0}")]
    InvalidEcf(String),

    #[error("invalid tau table: {0}")]
    InvalidTau(String),

    #[error("invalid spectral measure: {0}")]
    InvalidSpectralMeasure(String),

    #[error("empty subset is not allowed here")]
    EmptySubset,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("covariance matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("vertex enumeration supports at most {max} sites, got {got}", max = crate::depset::MAX_VERTEX_SITES)]
    TooManySites { got: usize },

    #[error("polytope is unbounded in coordinate {0}")]
    Unbounded(usize),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
