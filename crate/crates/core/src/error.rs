use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on {axis}: expected {expected}, found {found}")]
    Dimension {
        axis: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} row {row} is not a probability distribution (sum = {sum}, min = {min})")]
    NotStochastic {
        what: String,
        row: String,
        sum: f64,
        min: f64,
    },

    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no geometric mixing (rho = {0})")]
    NoMixing(f64),

    #[error("{}", match agent {
        Some(a) => format!("agent {a} diverged at step {step}"),
        None => format!("iterate diverged at step {step}"),
    })]
    Diverged { agent: Option<usize>, step: u64 },

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
