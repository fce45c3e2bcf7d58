use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error in {path} at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("EMPTY_INPUT: {0}")]
    EmptyInput(String),

    #[error("DEGENERATE_VARIANCE: variable `{0}` is constant")]
    DegenerateVariance(String),

    #[error("DEGENERATE_RANGE: all scores are equal")]
    DegenerateRange,

    #[error("NO_CONVERGENCE: eigen-solver did not converge in {0} sweeps")]
    NoConvergence(usize),

    #[error("EMPTY_REGION: region `{0}` has no members")]
    EmptyRegion(String),

    #[error("UNKNOWN_REGION: region `{0}` not found")]
    UnknownRegion(String),

    #[error("SINGULAR_DESIGN: column `{0}` is collinear with the others")]
    SingularDesign(String),

    #[error("BOTH_CLASSES_REQUIRED: binary response has a single class")]
    BothClassesRequired,

    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("NETWORK: {0}")]
    Network(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Coarse error grouping used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorFamily {
    Io,
    Schema,
    EmptyInput,
    Numeric,
    Region,
    Regression,
    Network,
    Input,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn family(&self) -> ErrorFamily {
        match self {
            Error::Io { .. } => ErrorFamily::Io,
            Error::Schema(_) | Error::Parse { .. } => ErrorFamily::Schema,
            Error::EmptyInput(_) => ErrorFamily::EmptyInput,
            Error::DegenerateVariance(_) | Error::DegenerateRange | Error::NoConvergence(_) => {
                ErrorFamily::Numeric
            }
            Error::EmptyRegion(_) | Error::UnknownRegion(_) => ErrorFamily::Region,
            Error::SingularDesign(_) | Error::BothClassesRequired => ErrorFamily::Regression,
            Error::Http { .. } | Error::Network(_) => ErrorFamily::Network,
            Error::InvalidInput(_) => ErrorFamily::Input,
        }
    }
}
