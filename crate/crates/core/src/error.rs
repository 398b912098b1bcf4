use thiserror::Error;

/// Errors raised by chart, metric, geodesic and causality routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("operation undefined at the zero vector")]
    ZeroVector,

    #[error("invalid data at {point:?}: {reason}")]
    InvalidData { point: Vec<f64>, reason: String },

    #[error("hypersurface is not spacelike at {point:?} (sup df = {sup})")]
    NotSpacelike { point: Vec<f64>, sup: f64 },

    /// Carries the partial trajectory (one coordinate vector per accepted step).
    #[error("integration failed after {steps} steps: {reason}")]
    IntegrationFailure { steps: usize, reason: String, partial: Vec<Vec<f64>> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("no minimizing segment found from the set to {point:?}")]
    NoMinimizer { point: Vec<f64> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
