//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GegenError {
    /// A parameter is outside its admissible range. Carries the field name
    /// and the range so callers can produce precise diagnostics.
    #[error("invalid parameter `{name}`: {value} not in {range}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// Evaluation requested exactly at a spectral pole `cos λ_i = u_i`.
    #[error("singular evaluation: cos λ{axis} equals u{axis} (pole frequency)")]
    PoleEvaluation { axis: usize },

    /// Lag outside the admissible range for the observed grid.
    #[error("lag ({j1}, {j2}) out of range for T = {size_t}")]
    LagOutOfRange { j1: i64, j2: i64, size_t: usize },

    /// A periodogram was evaluated on a different frequency grid than the
    /// quadrature grid it is being integrated against.
    #[error("frequency grid mismatch between periodogram and quadrature grid")]
    GridMismatch,

    /// The objective carries no information about θ (e.g. an all-zero field).
    #[error("degenerate objective: {0}")]
    DegenerateObjective(String),

    /// Every probed point of an objective was non-finite.
    #[error("objective not finite anywhere on the search box")]
    ObjectiveNotFinite,

    /// A matrix that must be inverted is singular or too ill-conditioned.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// Not enough samples, or degenerate sample covariance, in a statistical test.
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    /// Malformed serialized data (CSV/JSON field files). Carries the
    /// position of the first offending record.
    #[error("malformed input at {position}: {message}")]
    MalformedInput { position: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
