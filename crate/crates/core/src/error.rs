use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rate {rate} outside admissible interval ({lower}, {upper}]")]
    InvalidRate { rate: f64, lower: f64, upper: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "quadrature failed to converge: estimated error {achieved:e} above tolerance {requested:e}"
    )]
    NumericFailure { achieved: f64, requested: f64 },

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("rank {rank} is not below binomial({n}, {w})")]
    InvalidRank { rank: String, n: usize, w: usize },

    #[error("permutation search exhausted after {0} candidates")]
    SearchExhausted(u64),

    #[error("target {target:e} outside supported range [{lower:e}, {upper:e}]")]
    OutOfRange { target: f64, lower: f64, upper: f64 },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// True for failures of a numerical procedure as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericFailure { .. } | Error::SearchExhausted(_)
        )
    }
}
