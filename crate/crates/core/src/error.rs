use thiserror::Error;

use crate::coupling::ConvergenceReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kinematics: {0}")]
    InvalidKinematics(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("equilibrium not found: {0}")]
    EquilibriumNotFound(String),

    #[error("coupling did not converge at t = {time} d after {iterations} iterations")]
    NonConvergence {
        time: f64,
        iterations: usize,
        report: Box<ConvergenceReport>,
    },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn kinematics(message: impl Into<String>) -> Self {
        Error::InvalidKinematics(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
