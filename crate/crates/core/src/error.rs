use thiserror::Error;

use crate::coalition::Coalition;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coalition width {got} does not match player count {expected}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("coalition {0} was not recorded in the table")]
    MissingCoalition(Coalition),

    #[error("{n} players exceeds the enumeration cap of {cap}")]
    Capacity { n: usize, cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid index parameters: {0}")]
    InvalidIndex(String),

    #[error("{family} has no coalition weights p_t^s(n)")]
    NoCoalitionWeights { family: &'static str },

    #[error("weight arguments out of range: n={n}, s={s}, t={t}")]
    WeightRange { n: usize, s: usize, t: usize },

    #[error("sampling probability must be positive, got {0}")]
    ZeroProbability(f64),

    #[error("budget {budget} exceeds the {available} distinct coalitions available")]
    Budget { budget: u128, available: u128 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("key sets differ: {0}")]
    KeyMismatch(String),

    #[error("ground truth unobtainable: {0}")]
    TruthUnavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Capacity and precondition failures, as opposed to I/O or parse failures.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Capacity { .. }
                | Error::Precondition(_)
                | Error::InvalidIndex(_)
                | Error::NoCoalitionWeights { .. }
                | Error::WeightRange { .. }
                | Error::ZeroProbability(_)
                | Error::Budget { .. }
                | Error::WidthMismatch { .. }
                | Error::MissingCoalition(_)
                | Error::KeyMismatch(_)
                | Error::TruthUnavailable(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
