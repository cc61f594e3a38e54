//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("parameter point {point:?} lies outside the domain box {lo:?}..{hi:?}")]
    OutsideDomain {
        point: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },

    #[error("matrix is not Hermitian: entry ({row},{col}) = {value} has no matching adjoint entry")]
    NotHermitian { row: usize, col: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("eigensolver failed{} after {iterations} iterations (worst residual {residual:.3e})",
            mu_context(.mu))]
    SolverFailure {
        mu: Option<Vec<f64>>,
        iterations: usize,
        residual: f64,
    },

    #[error("dense solve refused: dimension {dim} exceeds the dense cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("numerical conditioning failure in {context}: {detail}")]
    Conditioning { context: &'static str, detail: String },

    #[error("reduced model is missing {what}; re-run the offline precompute step")]
    MissingBlocks { what: &'static str },

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("model file schema version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn mu_context(mu: &Option<Vec<f64>>) -> String {
    match mu {
        Some(mu) => format!(" at mu = {mu:?}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
