use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's contract (bad dimensions, empty
    /// inputs, out-of-range arguments).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration is self-contradictory or incomplete; detected
    /// before round 1 of a run.
    #[error("config error: {0}")]
    Config(String),

    /// A file could not be parsed; the message names the offending field.
    #[error("parse error: {0}")]
    Parse(String),

    /// The consumption graph admits no Hamiltonian path.
    #[error("no feasible path through the consumption matrix")]
    NoFeasiblePath,

    /// The drawn tier holds fewer clients than requested. Re-drawable:
    /// the engine retries with the next seed substream.
    #[error("drawn tier too small: {0}")]
    TierTooSmall(String),

    /// An operation produced a non-finite parameter value.
    #[error("numerical error: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
