use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("symbol not in constellation")]
    SymbolNotInConstellation,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("value {value} outside the quantizer range")]
    OutOfRange { value: f64 },

    #[error("{q}-bit quantizer maps every operand to zero")]
    QuantizerUnderflow { q: u32 },

    #[error("effective channel matrix is rank deficient")]
    RankDeficient,

    /// Work needed exceeds the configured limit.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
}

impl Error {
    /// True for refusals caused by resource limits rather than invalid input.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded(_))
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
