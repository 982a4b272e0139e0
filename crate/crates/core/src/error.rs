use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("player index {index} out of range for {n} players")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("profile has {got} players, mechanism expects {expected}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid player type: {0}")]
    InvalidPlayer(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("privacy loss is unbounded: {0}")]
    UnboundedLoss(String),

    #[error("loss model `{0}` has no threshold function")]
    MissingThreshold(String),

    #[error("profile must have at least one player")]
    EmptyProfile,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
