use thiserror::Error;

/// Which end of the profile's depth range a query fell outside of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeBound {
    Surface,
    Bottom,
}

impl std::fmt::Display for RangeBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RangeBound::Surface => f.write_str("above the surface bound"),
            RangeBound::Bottom => f.write_str("below the bottom bound"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("depth {z} m is {bound} ({limit} m) of the profile range")]
    OutOfRange {
        z: f64,
        bound: RangeBound,
        limit: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: non-finite value in `{signal}`")]
    NumericalFailure { signal: &'static str },

    #[error("time regression: step at {current} s after {previous} s")]
    TimeRegression { previous: f64, current: f64 },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("run aborted after record {last_record}: {source}")]
    Aborted {
        last_record: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(value: f64, signal: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericalFailure { signal })
    }
}
