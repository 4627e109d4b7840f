//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration: unknown keys, inconsistent horizons, invalid defaults.
    #[error("configuration error: {0}")]
    Config(String),

    /// Bad input data: unparseable price files, coverage gaps, non-monotone timestamps.
    #[error("data error: {0}")]
    Data(String),

    /// Argument outside the physical or mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Power setpoint that cannot be interpreted (non-finite, beyond rated power).
    #[error("setpoint error: {0}")]
    Setpoint(String),

    /// A string's state of health dropped to or below zero / end of life.
    #[error("battery expired: {0}")]
    Expired(String),

    /// Brute-force oracle asked to solve an instance beyond its bounded search size.
    #[error("oracle scope error: {0}")]
    OracleScope(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) => 3,
            _ => 4,
        }
    }
}
