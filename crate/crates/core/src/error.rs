use thiserror::Error;

use crate::fit::FitResult;

/// Errors raised by the power-law model itself.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("curve evaluated outside its domain: x = {0} (must be > 0)")]
    Domain(f64),
    #[error("invalid curve parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("fit problem is invalid: {0}")]
    InvalidProblem(String),
    #[error("all observed values are equal ({0}); a power law cannot represent flat data")]
    DegenerateData(f64),
    #[error("fit did not converge after {} iterations (sse = {})", .0.iterations, .0.sse)]
    Diverged(Box<FitResult>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("observation level {got} does not follow level {expected_after}")]
    LevelGap { expected_after: u32, got: u32 },
    #[error("observation at level {level} has size {x}, which does not increase over {previous}")]
    NonIncreasingSize { level: u32, x: f64, previous: f64 },
    #[error("observation at level {level} has size {x}, scheme expects {expected}")]
    SchemeMismatch { level: u32, x: f64, expected: f64 },
    #[error("observation at level {level} has accuracy {accuracy} outside (0, 100]")]
    AccuracyOutOfRange { level: u32, accuracy: f64 },
    #[error("need at least 3 observations to fit a trend, got {0}")]
    TooFewObservations(usize),
    #[error("invalid trace parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Anchor(#[from] AnchorError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnchorError {
    #[error("the working level is not resolved yet")]
    MissingWLevel,
    #[error("the prediction level is not resolved before the look-ahead switch at level {0}")]
    MissingPLevel(u32),
    #[error("invalid anchoring strategy: {0}")]
    InvalidStrategy(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvergenceError {
    #[error("curves are coincident on the scanned interval")]
    CoincidentCurves,
    #[error(
        "asymptotic backbone increases at level {level} ({previous} -> {current}); \
         absolute thresholds need a decreasing backbone, use fixed anchoring"
    )]
    NotDecreasing { level: u32, previous: f64, current: f64 },
    #[error("no level satisfies the requested condition within the trace")]
    NotReached,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Anchor(#[from] AnchorError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("run '{0}' has no resolved convergence level")]
    UnresolvedCLevel(String),
    #[error("a horizon is required for accuracy metrics")]
    MissingHorizon,
    #[error("no proximity condition is fastest on this frame: {0}")]
    NoFastestCondition(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error(transparent)]
    Convergence(#[from] ConvergenceError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}
