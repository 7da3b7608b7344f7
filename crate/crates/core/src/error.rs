//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix has the wrong length/shape. `what` names the field.
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    /// Generic validation failure with a precise, field-naming message.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Requested enlargement parameter lies outside `[xi_e, 1)`.
    #[error("xi = {xi} outside [{xi_e}, 1)")]
    XiOutOfRange { xi: f64, xi_e: f64 },

    /// No strictly feasible point was found for the inequality system.
    /// Carries the least-violating point seen and its margin.
    #[error("no Slater point found (best margin {best_margin:.6e})")]
    SlaterInfeasible {
        best_margin: f64,
        best_point: Vec<f64>,
    },

    /// The phi-tightened constraints admit no strict-interior point.
    #[error("phi-tightened system infeasible (phi = {phi:.6e}, best margin {best_margin:.6e})")]
    TightenedInfeasible { phi: f64, best_margin: f64 },

    /// A bound formula was evaluated at a point that is not strictly feasible.
    #[error("nonpositive constraint margin {margin:.6e}; point is not a Slater point")]
    NonpositiveMargin { margin: f64 },

    /// Iteration budget exhausted before the residual tolerance was met.
    #[error("solver did not converge: residual {residual:.6e} after {iters} iterations")]
    NotConverged {
        residual: f64,
        iters: usize,
        last: Box<crate::solver::SaddleSolution>,
    },

    /// Dual step size violates the admissible bound.
    #[error("dual step beta = {beta:.6e} exceeds admissible bound {bound:.6e}")]
    StepSizeViolation { beta: f64, bound: f64 },

    /// The simulator requires a reference solved to high precision.
    #[error("reference solution residual {residual:.3e} exceeds {required:.3e}")]
    ReferenceMissing { residual: f64, required: f64 },

    /// Enumeration space exceeds the configured limit.
    #[error("enumeration space {count} exceeds limit {limit}")]
    TooLarge { count: u128, limit: u128 },

    /// The brute-force oracle only handles pure-integer instances.
    #[error("brute-force oracle requires n = 0, instance has n = {n}")]
    MixedUnsupported { n: usize },

    /// No feasible point exists.
    #[error("infeasible")]
    Infeasible,

    /// The polyhedron used by the Hoffman estimator is empty.
    #[error("empty polyhedron")]
    EmptyPolyhedron,

    /// Malformed input document. Includes line/column for syntax errors.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(format!("{} (line {}, column {})", e, e.line(), e.column()))
    }
}
