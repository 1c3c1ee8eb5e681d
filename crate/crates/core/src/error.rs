//! Error type shared by all modules.

use thiserror::Error;

/// Errors surfaced by library operations.
///
/// `category` (used by the CLI for machine-readable reporting and exit
/// codes) maps one-to-one onto the variants.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs failed (out-of-range argument, shape
    /// mismatch, malformed source).
    #[error("input: {0}")]
    Input(String),

    /// The requested computation exceeds a configured work budget.
    #[error("budget: {what} needs {needed} but the cap is {cap}")]
    Budget {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    /// Roundoff grew past what the algorithm's error analysis allows; this
    /// indicates a bug, not bad input.
    #[error("internal consistency: {0}")]
    Internal(String),

    /// A search operation proved that no witness exists.
    #[error("no witness: {0}")]
    NoWitness(String),

    /// File or serialization problem.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk or textual data.
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Stable category label for reports and exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Budget { .. } => "budget",
            Error::Internal(_) => "internal",
            Error::NoWitness(_) => "no_witness",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }
}
