use thiserror::Error;

use crate::blockpca::BlockPcaSolution;
use crate::expvar::OptimalProjection;

pub type Result<T> = std::result::Result<T, Error>;

/// Last iterate of an iterative scheme that ran out of iterations.
#[derive(Debug, Clone)]
pub enum PartialResult {
    Projection(Box<OptimalProjection>),
    Solution(Box<BlockPcaSolution>),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("InvalidInput: {0}")]
    InvalidInput(String),

    #[error("RankDeficient: {0}")]
    RankDeficient(String),

    #[error("DegenerateBasis: {0}")]
    DegenerateBasis(String),

    #[error("NonConverged: no stationary point after {iterations} iterations (objective {objective})")]
    NonConverged {
        iterations: usize,
        objective: f64,
        partial: PartialResult,
    },

    /// A documented ordering or bound between variance definitions failed.
    #[error("InvariantViolation: {0}")]
    InvariantViolation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn rank(msg: impl Into<String>) -> Self {
        Error::RankDeficient(msg.into())
    }
}
