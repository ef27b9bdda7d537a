use thiserror::Error;

use crate::report::Witness;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or incompatible arguments (wrong point kind, parameter
    /// outside its range, ...).
    #[error("input error: {0}")]
    Input(String),

    /// A mathematical precondition does not hold (zero factor in a product,
    /// nonpositive bound, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Checked integer arithmetic overflowed while evaluating a rate.
    #[error("integer overflow while evaluating {0}")]
    Overflow(String),

    /// A tabulated rate was queried outside the arguments it covers.
    ///
    /// `floor`, when known, is a lower bound on the true value at `arg`.
    #[error("rate table exhausted at argument {arg} (table covers 0..{len})")]
    DomainExhausted {
        arg: u128,
        len: usize,
        floor: Option<u128>,
    },

    /// More iterations are needed than the trace or scan horizon provides.
    #[error("horizon too short for {what}: need index {required}, horizon is {horizon}")]
    HorizonExceeded {
        what: String,
        required: u128,
        horizon: usize,
    },

    /// A supplied modulus or bound failed its empirical validation.
    #[error("precondition failed: {check} ({witness})")]
    Precondition { check: String, witness: Witness },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn overflow(what: impl Into<String>) -> Self {
        Error::Overflow(what.into())
    }
}
