use thiserror::Error;

/// Errors produced by the simulator layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Fock space too small to hold a ladder operator.
    #[error("fock space dimension must be at least 2, got {0}")]
    InvalidSpace(usize),

    /// A scalar or structural argument failed validation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two operands live in spaces of different dimension.
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    /// A density-matrix invariant was violated beyond tolerance mid-run.
    #[error("integrator failure at t = {t}: {reason}")]
    IntegratorFailure { t: f64, reason: String },

    /// The vectorized generator has more than the expected one-dimensional
    /// null space (or the constrained solve broke down).
    #[error("degenerate steady state: {0}")]
    DegenerateSteadyState(String),

    /// Long-time relaxation did not settle below tolerance.
    #[error("steady-state evolution did not converge by t = {t_cap}")]
    ConvergenceFailure { t_cap: f64 },

    /// A window search found no defined correlation samples.
    #[error("no defined correlation samples in the requested window")]
    EmptyWindow,

    /// The operation does not support the supplied configuration.
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// A requested time lies outside the simulated horizon.
    #[error("time grid out of range: {0}")]
    RangeError(String),

    /// A periodic-cycle check was asked to run on an unsettled period.
    #[error("period not settled: {0}")]
    NotSettled(String),

    /// Dense linear solve hit a numerically zero pivot.
    #[error("matrix is numerically singular")]
    SingularMatrix,
}

pub type Result<T> = std::result::Result<T, Error>;
