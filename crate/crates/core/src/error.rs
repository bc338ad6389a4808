use thiserror::Error;

use crate::model_zoo::ModelId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model {model} expects {expected} parameters, got {got}")]
    DimensionMismatch {
        model: ModelId,
        expected: usize,
        got: usize,
    },

    #[error("saddle point for model {model} did not converge after {iterations} iterations (residual {residual:e})")]
    SaddleNotConverged {
        model: ModelId,
        iterations: usize,
        residual: f64,
    },

    #[error("quadrature for model {model} did not converge: {coarse} vs {fine} on node doubling")]
    QuadratureNotConverged { model: ModelId, coarse: f64, fine: f64 },

    #[error("invalid statistics: {0}")]
    InvalidStats(String),

    #[error("decision table built for N = {expected} queried with N = {got}")]
    SampleSizeMismatch { expected: usize, got: usize },

    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("incompatible topology: {0}")]
    Topology(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 for bad input,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::SaddleNotConverged { .. } | Error::QuadratureNotConverged { .. } => 3,
            Error::Pair { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    pub(crate) fn at_pair(self, i: usize, j: usize) -> Error {
        Error::Pair {
            i,
            j,
            source: Box::new(self),
        }
    }
}
