use thiserror::Error;

/// Errors raised by the library.
///
/// Parameter errors are caller mistakes; budget errors mean a request was
/// well-formed but would exceed one of the configured work limits.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("empty region at this scale")]
    EmptyRegion,

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("basis has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error(
        "subgroup is not maximal (invariant factors {factors:?}); saturate it first, \
         e.g. with `SubgroupBasis::saturate`"
    )]
    NotMaximal { factors: Vec<i64> },

    #[error("coset chain at prime {prime} exceeded {depth} levels")]
    ChainDepth { prime: u64, depth: u32 },

    #[error("window mismatch: {0}")]
    WindowMismatch(String),
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget(_) | Error::ChainDepth { .. })
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn budget(msg: impl Into<String>) -> Self {
        Error::Budget(msg.into())
    }

    pub(crate) fn overflow(msg: impl Into<String>) -> Self {
        Error::Overflow(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
