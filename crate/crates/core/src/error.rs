use thiserror::Error;

use crate::evidence::CompositeEvidence;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A number assumed to be a probable prime turned out composite while
    /// doing arithmetic that is only valid modulo a prime.
    #[error("not prime: {0}")]
    NotPrime(CompositeEvidence),

    /// Randomized search gave up without a verdict.
    #[error("undecided: {0}")]
    Undecided(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
