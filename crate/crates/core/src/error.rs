use thiserror::Error;

/// Errors raised by the geometry, flow, and verification layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("degenerate parametrization at node {node}: speed {speed:e}")]
    DegenerateParametrization { node: usize, speed: f64 },

    #[error("Frenet frame undefined at node {node}: |u''×u'| = {cross:e} below threshold {threshold:e}")]
    InflectionDegeneracy {
        node: usize,
        cross: f64,
        threshold: f64,
    },

    #[error("step failed: {0}")]
    StepFailure(String),

    #[error("invalid time: t = {t} is not before T = {blowup}")]
    InvalidTime { t: f64, blowup: f64 },

    #[error("time t = {t} is past the singular time {blowup} of the circle")]
    PastSingularity { t: f64, blowup: f64 },

    #[error("insufficient data: {found} qualifying snapshots, need {required}")]
    InsufficientData { found: usize, required: usize },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
