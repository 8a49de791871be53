use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Put prices that admit static arbitrage.
    #[error("arbitrage: {0}")]
    Arbitrage(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("path budget exceeded: {paths} lattice paths > budget {budget}")]
    Budget { paths: u128, budget: usize },

    /// A caller-supplied object broke its documented contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An internal postcondition failed; indicates a bug rather than bad input.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
