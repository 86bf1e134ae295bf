//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A tag stream violated its time-ordering invariant.
    #[error("tag stream is not time-sorted")]
    UnsortedStream,

    /// An operation required a normalized histogram and got a raw one.
    #[error("histogram is not normalized")]
    NotNormalized,

    #[error("field maps are on different grids: {0}")]
    GridMismatch(String),

    /// The J^T W J normal matrix could not be factorized even with damping.
    #[error("singular normal matrix in least-squares solve")]
    SingularMatrix,

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    /// A fitted or derived quantity left its physical domain.
    #[error("unphysical result: {0}")]
    Unphysical(String),

    #[error("{path}: bad file format: {detail}")]
    Format { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(path: &std::path::Path, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.display().to_string(),
            detail: detail.into(),
        }
    }
}
