use thiserror::Error;

/// Errors raised by graph, boundary and spectral operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid boundary condition: {0}")]
    InvalidBoundary(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{0} is not an eigenvalue (sigma_min/|M| = {1:.3e})")]
    NotAnEigenvalue(f64, f64),
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
