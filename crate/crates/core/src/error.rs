use thiserror::Error;

use crate::model::Observable;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid {kind} {value:?}: expected non-empty [A-Za-z0-9_-]")]
    InvalidIdent { kind: &'static str, value: String },

    #[error("contract {contract}: {message}")]
    InvalidContract { contract: String, message: String },

    #[error("block of {len} transactions exceeds the limit of {limit}")]
    BlockTooLarge { len: usize, limit: usize },

    #[error("step {step:?} is not enabled at the given marking")]
    NotEnabled { step: Vec<usize> },

    #[error("transition {0} does not exist in the net")]
    UnknownTransition(usize),

    #[error("step of {size} transitions exceeds the linearization bound {limit}")]
    StepTooLarge { size: usize, limit: usize },

    #[error("state space of {size} states exceeds the bound {limit}")]
    StateSpaceTooLarge { size: usize, limit: usize },

    #[error("merge conflict on {0}")]
    Conflict(Observable),

    #[error("workers must be at least 1")]
    NoWorkers,

    #[error("{path}: {message}")]
    Schema { path: String, message: String },
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
