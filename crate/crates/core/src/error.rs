use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed {what}: {source}")]
    Parse {
        what: &'static str,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed {what} at line {line}: {message}")]
    Format {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid ontology ({} issue(s)): {}", .0.len(), .0.join("; "))]
    InvalidOntology(Vec<String>),

    #[error("invalid mapping ({} issue(s)): {}", .0.len(), .0.join("; "))]
    InvalidMapping(Vec<String>),

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("unknown event type `{0}`")]
    UnknownEventType(String),

    #[error("confidence {value} outside [0, 1] at {location}")]
    ConfidenceOutOfRange { location: String, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("brute-force guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("no intrusion candidate with positive weight for schema `{0}`")]
    NoCandidate(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty schema index")]
    EmptyIndex,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, source: serde_json::Error) -> Self {
        Error::Parse { what, source }
    }

    pub(crate) fn format(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            line,
            message: message.into(),
        }
    }
}
