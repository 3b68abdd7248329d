use thiserror::Error;

use crate::space::ValidationReport;

/// Errors produced by the library.
///
/// Structural problems (malformed input shapes) are kept distinct from
/// validation failures (well-formed input that violates the antipodal-space
/// rules): the former are `Structural`, the latter carry the full
/// [`ValidationReport`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),

    #[error("space validation failed: {} rule violation(s), first: {:?}", .0.failures.len(), .0.failures.first())]
    Validation(Box<ValidationReport>),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("operation needs at least {needed} points, space has {got}")]
    UnsupportedSize { needed: usize, got: usize },

    #[error("points belong to different spaces")]
    SpaceMismatch,

    #[error("point not certified: {0}")]
    NotCertified(String),

    #[error(
        "matrix is not Moebius equivalent to the base (deviation {deviation:.3e} > tol {tol:.3e})"
    )]
    NotMoebius { deviation: f64, tol: f64 },

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
