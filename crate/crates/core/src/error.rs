use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("argument outside the analyticity half-plane: {0}")]
    Domain(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("quadrature budget exhausted: {0}")]
    Quadrature(String),
    #[error("contour envelope does not decay below tolerance by height {height}")]
    UnboundedContour { height: f64 },
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("derivative of order {order} exceeds the smoothness index {limit}")]
    Smoothness { order: usize, limit: i64 },
    #[error("point {0} lies outside the support")]
    Support(f64),
    #[error("co-eigenfunction of order {0} is not square integrable against the invariant law")]
    Membership(usize),
    #[error("integral diverges toward the endpoint (partial value {partial})")]
    DivergenceDetected { partial: f64 },
    #[error("time {t} is not above the expansion threshold {t_min}")]
    TimeBelowThreshold { t: f64, t_min: f64 },
    #[error("operation needs a different model class: {0}")]
    Class(String),
    #[error("jump family cannot be simulated exactly: {0}")]
    UnsupportedJumps(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("clock did not ring before the horizon {horizon}")]
    Horizon { horizon: f64 },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
