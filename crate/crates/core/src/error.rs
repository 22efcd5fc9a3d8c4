//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The adaptive integrator exceeded its accepted-step budget.
    #[error("integration budget exhausted after {steps} steps at t = {t}")]
    BudgetExhausted { steps: usize, t: f64 },

    /// A dynamics callback produced a non-finite value.
    #[error("dynamics evaluation failed: non-finite right-hand side at t = {t}")]
    DynamicsFailed { t: f64 },

    /// Query time past the horizon.
    #[error("empty horizon: t0 = {t0} exceeds T = {horizon}")]
    EmptyHorizon { t0: f64, horizon: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Explicit time step too large for the monotone scheme.
    #[error("CFL violation: dt = {dt} exceeds the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    /// Point outside the grid hull.
    #[error("out of domain: ({x1}, {x2})")]
    OutOfDomain { x1: f64, x2: f64 },

    /// Every candidate terminal gradient vanished in the alignment search.
    #[error("degenerate alignment: all terminal gradients vanish")]
    DegenerateAlignment,

    /// A declared game decomposition failed its sampled consistency check.
    #[error("decomposition inconsistency: residual {residual} at (t, l) sample {detail}")]
    DecompositionInconsistent { residual: f64, detail: String },

    /// Problem data violates a structural requirement.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A Monte Carlo run aborted; the index identifies the failing stream.
    #[error("run {run} failed: {source}")]
    RunFailed {
        run: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
