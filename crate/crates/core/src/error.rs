use thiserror::Error;

pub type Result<T> = std::result::Result<T, HawkesError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HawkesError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel argument must be non-negative, got t = {0}")]
    NegativeTime(f64),

    #[error("kernel is not integrable: power-law exponent w = {0} must be < -1")]
    Divergent(f64),

    #[error("model is not stationary: spectral radius {0} >= 1")]
    NonStationary(f64),

    #[error("invalid event series: {0}")]
    InvalidSeries(String),

    #[error("intensity never reached its stationary mean within the horizon")]
    NoStationarityReached,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

impl From<std::io::Error> for HawkesError {
    fn from(e: std::io::Error) -> Self {
        HawkesError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HawkesError {
    fn from(e: serde_json::Error) -> Self {
        HawkesError::Config(e.to_string())
    }
}
