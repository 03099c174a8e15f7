use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("document {index} is empty")]
    EmptyDocument { index: usize },

    #[error("rank deficient: numerical rank {rank} < {required} ({detail})")]
    RankDeficient {
        rank: usize,
        required: usize,
        detail: String,
    },

    #[error("gamma is singular (sigma_min = {sigma_min:e})")]
    SingularGamma { sigma_min: f64 },

    #[error("linear solve failed: {0}")]
    LinearAlgebra(String),

    #[error("solver diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("undefined input: {0}")]
    Undefined(String),

    #[error("topic count {k} too large for exhaustive matching (max {max}); use greedy matching")]
    TooManyTopics { k: usize, max: usize },

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: index out of range: {msg}")]
    Bounds {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: format error: {msg}")]
    Format { path: String, msg: String },

    #[error("model file: {0}")]
    Model(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
