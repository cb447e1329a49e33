use thiserror::Error;

/// Errors produced by the solver toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} defines b(z) only and has no convolution weights")]
    NoConvolutionWeights(&'static str),

    #[error(
        "starting-weight system is ill-conditioned for m = {m}, sigma = {sigmas:?} (condition {condition:.3e})"
    )]
    IllConditioned {
        m: usize,
        sigmas: Vec<f64>,
        condition: f64,
    },

    #[error("step {step} is startup territory for m = {m}; use the startup procedure")]
    StartupIndex { step: usize, m: usize },

    #[error(
        "nonlinear solve failed at step {step}: residual {residual:.3e} after {iterations} iterations"
    )]
    SolverFailure {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    #[error(
        "exponential-sum approximation missed its target {target:.2e}: best max |eps_n| = {achieved:.3e} at Q = {nodes}"
    )]
    ExpSumAccuracy {
        target: f64,
        achieved: f64,
        nodes: usize,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
