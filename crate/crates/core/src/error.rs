use thiserror::Error;

use crate::quantum::ConvergenceReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max |O - O^dag| = {0:.3e})")]
    NotHermitian(f64),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration blew up at t = {t}: {detail}")]
    IntegrationBlowup { t: f64, detail: String },

    #[error("trajectory is not a limit cycle: {0}")]
    NotACycle(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("steady state is not unique: null space has dimension >= {0}")]
    Multiplicity(usize),

    #[error("step size underflow at t = {t} (h = {h:.3e}); the generator is too stiff for explicit propagation, reduce the truncation or use the direct steady-state solver")]
    Stiffness { t: f64, h: f64 },

    #[error("numerical inconsistency: {0}")]
    Inconsistent(String),

    #[error("correlation undefined for mean photon number {0:.3e}")]
    UndefinedCorrelation(f64),

    #[error("phase-space grid too large: {0}")]
    GridTooLarge(String),

    #[error("memory budget exceeded: need ~{required} bytes, budget {budget} bytes")]
    MemoryBudget {
        required: usize,
        budget: usize,
        best: Option<Box<ConvergenceReport>>,
    },

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
}
