use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample size {k} exceeds urn size {n} when sampling without replacement")]
    SampleSize { k: u64, n: u64 },

    #[error("sample size must be at least 1")]
    InvalidSize,

    #[error("reinforcement value {value} at ({x}, {y}) lies outside [0, 1]")]
    ReinforcementRange { value: f64, x: f64, y: f64 },

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("capability missing: {0}")]
    Capability(String),

    #[error("evaluation cost {cost:.3e} exceeds the configured cap {cap:.3e}")]
    CostGuard { cost: f64, cap: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last iterate ({x}, {y}))")]
    Convergence { iterations: usize, x: f64, y: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("case mismatch: {0}")]
    Case(String),

    #[error("mean-field path left the simplex at t = {t}: ({x}, {y})")]
    Integration { t: f64, x: f64, y: f64 },

    #[error("config error{loc}: {message}", loc = location(*line, *column))]
    Config { line: usize, column: usize, message: String },

    #[error("replication {replication} failed: {source}")]
    Replication {
        replication: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::invalid(name, reason)
}

fn location(line: usize, column: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}, column {column}")
    }
}
