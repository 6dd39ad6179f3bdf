use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of the pieces of a model do not fit together.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exhaustive computation would exceed its size guard.
    #[error("{what} exceeds the limit of {limit}")]
    Resource { what: String, limit: usize },

    /// A parameter block decodes to a zero operator.
    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("{family} do not commute (max commutator norm {residual:.3e} > tol {tol:.1e})")]
    NotCommuting {
        family: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("model failed validation: {0}")]
    Validation(ValidationReport),

    /// Embedded reference data does not satisfy its own constraints.
    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
}
