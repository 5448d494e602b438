use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid vertex count: {0}")]
    InvalidVertexCount(usize),

    #[error("vertex index {index} out of range for {p} vertices")]
    VertexOutOfRange { index: usize, p: usize },

    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),

    #[error("edge weights have length {got}, expected {expected}")]
    WeightLengthMismatch { got: usize, expected: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("forest edge {0} is already cut")]
    EdgeAlreadyCut(usize),

    #[error("forest edge {0} is not cut")]
    EdgeNotCut(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty draw set")]
    EmptyDraws,

    #[error("quadrature failed to converge: {0}")]
    QuadratureFailed(String),

    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
