use thiserror::Error;

use crate::partitions::Site;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Enumeration over more elements than the configured guard allows.
    #[error("combinatorial blowup: {n} elements means Bell({n}) = {bell} partitions, limit is {limit} elements")]
    CombinatorialBlowup { n: usize, bell: u128, limit: usize },

    #[error("order {order} exceeds the provider's maximum order {max}")]
    OrderOverflow { order: usize, max: usize },

    #[error("unknown site {0:?}")]
    UnknownSite(Site),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("spectra are not positive semi-definite at k = {k}: {reason}")]
    PsdViolation { k: f64, reason: String },

    #[error("provider has no closed-form generating function")]
    NoGeneratingFunction,

    #[error("observable has infinite or undefined variance")]
    InfiniteVariance,

    #[error("exact integer arithmetic overflowed")]
    ArithmeticOverflow,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
