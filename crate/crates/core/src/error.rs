//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: entry {index} is not finite")]
    NonFinite { context: &'static str, index: usize },

    #[error("{context}: expected length {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "weighted system is rank deficient: |R[{index},{index}]| = {diag:.3e} \
         against leading diagonal {leading:.3e}"
    )]
    RankDeficient {
        index: usize,
        diag: f64,
        leading: f64,
    },

    #[error(
        "measurement {index} is degenerate: |a_m^H x| = {magnitude:.3e} \
         is below {threshold:.3e}, Fisher information undefined"
    )]
    DegenerateMeasurement {
        index: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("signal entry {index} is zero; amplitude/phase parameterization undefined")]
    ZeroSignalEntry { index: usize },

    #[error("Fisher information matrix has numerical rank {found}, expected {expected}")]
    UnexpectedFimRank { found: usize, expected: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
