use thiserror::Error;

/// Errors produced by graph construction and the analysis routines.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("vertex {0} is not in the graph")]
    UnknownVertex(usize),

    /// A query reached past the region where the finite truncation agrees with
    /// the infinite graph it stands for.
    #[error("radius {radius} around vertex {vertex} exceeds the safe radius {safe}")]
    Truncation {
        vertex: usize,
        radius: usize,
        safe: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertex cap exceeded: {requested} vertices requested, cap is {cap}")]
    CapExceeded { requested: usize, cap: usize },

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
