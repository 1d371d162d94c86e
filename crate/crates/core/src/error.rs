use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An opinion state that cannot exist, e.g. the empty set.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    /// The adaptive integrator could not make progress.
    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    Stiffness { t: f64, h: f64, state: Vec<f64> },

    #[error("invalid network parameters: {0}")]
    Network(String),

    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }
}
