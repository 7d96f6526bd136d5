use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` out of range: {value} ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("pair-number truncation at {cutoff} leaks {leakage:.3e} of the probability mass (limit {limit:.1e})")]
    TruncationLeakage { cutoff: usize, leakage: f64, limit: f64 },

    #[error("herald outcome ({h1}, {h2}) has no support (probability {prob:.3e})")]
    ZeroSupport { h1: usize, h2: usize, prob: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("eigenvalue {value:.3e} is too negative for a density operator")]
    NegativeEigenvalue { value: f64 },

    #[error("state space too large: {size} basis states exceeds limit {limit}")]
    StateSpaceOverflow { size: usize, limit: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}

pub(crate) fn check_squeezing(name: &'static str, value: f64) -> Result<()> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            reason: "must lie in [0, 1)",
        })
    }
}
