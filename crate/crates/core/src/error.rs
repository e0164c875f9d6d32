use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid scenario: {0}")]
    Validation(String),

    /// `2^(K b / W)` left the representable range; `K` is beyond any physical load.
    #[error("transmit power overflow for K = {users} users")]
    Overflow { users: u64 },

    /// Expected macro-cell user count is zero, the per-user average is undefined.
    #[error("degenerate load: expected macro-cell user count is zero")]
    DegenerateLoad,

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("root bracket failed: {0}")]
    Bracket(String),

    #[error("exhaustive search over {m} cells exceeds the cap of {cap}")]
    TooLarge { m: usize, cap: usize },

    /// A documented precondition of the call was violated.
    #[error("precondition violated: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
