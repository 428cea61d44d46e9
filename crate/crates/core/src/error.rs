use thiserror::Error;

/// Errors raised by the solver stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular Legendre Hessian (|det| = {det:e})")]
    SingularHessian { det: f64 },

    #[error("singular Jacobian in {context} (|det| = {det:e})")]
    SingularJacobian { context: &'static str, det: f64 },

    #[error("{context} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("degenerate boundary surface at zeta = {zeta:?}: {reason}")]
    DegenerateSurface { zeta: Vec<f64>, reason: String },

    #[error("non-finite characteristic state at xi = {xi}")]
    NonFinite { xi: f64 },

    #[error("singular chart at zeta index {zeta_index}, xi index {xi_index} (|det| = {det:e})")]
    SingularChart {
        zeta_index: usize,
        xi_index: usize,
        det: f64,
    },

    #[error("point {x:?} lies outside the characteristic fan")]
    OutOfDomain { x: Vec<f64> },

    #[error("caustic detected near xi = {xi}, zeta = {zeta:?} (|det| = {det:e})")]
    CausticDetected { xi: f64, zeta: Vec<f64>, det: f64 },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
