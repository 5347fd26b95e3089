use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented constraint. `field` names the offender.
    #[error("invalid {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("numerical blowup: non-finite state at step {step}")]
    Blowup { step: usize },

    #[error("particle {0} is not recorded in this trace")]
    NotRecorded(usize),

    #[error("network has {nodes} nodes; state-space construction is capped at {max}")]
    Capacity { nodes: usize, max: usize },

    #[error("no attractor reached within {budget} steps; raise relax_steps")]
    AttractorBudget { budget: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::parse(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    }
}
