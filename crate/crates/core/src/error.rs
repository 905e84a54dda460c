use thiserror::Error;

/// Errors raised by the geometry, kernel, solver, entropy and verify layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time {time} outside the flow domain: {reason}")]
    Domain { time: f64, reason: String },

    #[error("invalid point: {0}")]
    Point(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stencil at node {node} leaves the grid")]
    Stencil { node: usize },

    #[error("truncation insufficient: remainder {remainder:.3e} > tolerance {tolerance:.3e} (suggested cutoff {suggested})")]
    Truncation {
        remainder: f64,
        tolerance: f64,
        suggested: usize,
    },

    #[error("no slice at time {0}")]
    MissingSlice(f64),

    #[error("solver did not converge: {0}")]
    Convergence(String),

    #[error("positivity lost at time {time} (min {min:.3e})")]
    Positivity { time: f64, min: f64 },

    #[error("scheduling error: {0}")]
    Schedule(String),

    #[error("data quality: {0}")]
    DataQuality(String),

    #[error("unknown check id `{0}`")]
    UnknownCheck(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for errors that indicate a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence(_)
                | Error::Positivity { .. }
                | Error::Truncation { .. }
                | Error::DataQuality(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
