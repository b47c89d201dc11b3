use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fractional order list is empty")]
    EmptyOrders,
    #[error("fractional order alpha[{index}] = {value} is outside (0, 1)")]
    OrderOutOfRange { index: usize, value: f64 },
    #[error("fractional orders must be strictly increasing (alpha[{index}] = {prev} >= alpha[{}] = {next})", index + 1)]
    OrdersNotStrictlyIncreasing { index: usize, prev: f64, next: f64 },

    #[error("horizon T must be positive and finite, got {0}")]
    NonPositiveHorizon(f64),
    #[error("number of steps must be at least 1")]
    ZeroSteps,
    #[error("time {s} is outside the grid domain [0, {horizon}]")]
    OutOfDomain { s: f64, horizon: f64 },

    #[error("problem dimension must be at least 1")]
    ZeroDimension,
    #[error("initial state has {got} components, problem dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial state is not finite")]
    NonFiniteInitialState,

    #[error("coarsening factor {factor} does not divide the step count {steps}")]
    FactorDoesNotDivideN { factor: usize, steps: usize },

    #[error("invalid SOE window: need 0 < delta < T, got delta = {delta}, T = {horizon}")]
    InvalidWindow { delta: f64, horizon: f64 },
    #[error("invalid SOE parameter: {0}")]
    InvalidSoeParameter(String),
    #[error("SOE construction for alpha = {alpha} reached max error {achieved:e}, tolerance {epsilon:e}")]
    ToleranceNotMet {
        alpha: f64,
        epsilon: f64,
        achieved: f64,
    },
    #[error("kernel evaluation requires t > 0, got {0}")]
    NonPositiveTime(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("SOE for alpha = {alpha} is valid from delta = {delta}, but step size is {step}")]
    SoeWindowTooNarrow { alpha: f64, delta: f64, step: f64 },
    #[error("expected one SOE approximation per order ({expected}), got {got}")]
    SoeCountMismatch { expected: usize, got: usize },
    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("error values must be positive, got {value} at index {index}")]
    NonPositiveError { index: usize, value: f64 },
    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),
    #[error("path {path} failed: {source}")]
    PathFailed {
        path: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{stage} failed at n = {resolution}: {source}")]
    StageFailed {
        stage: &'static str,
        resolution: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown problem id {0:?}")]
    UnknownProblem(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
