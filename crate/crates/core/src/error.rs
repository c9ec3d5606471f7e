use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A function was evaluated outside its domain (e.g. negative flow).
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller passed inconsistent arguments.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The input parsed but describes an invalid model.
    #[error("validation error: {0}")]
    Validation(String),

    /// Demand exists between pairs that have no connecting path.
    #[error("unroutable demand for {} pair(s), first: {:?}", .pairs.len(), .pairs.first())]
    Unroutable { pairs: Vec<(usize, usize)> },

    /// An internal invariant failed; signals a construction bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Tags an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
