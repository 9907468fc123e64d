use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped so that the command-line front end can map them onto
/// process exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point {point:?} lies outside {domain}")]
    OutsideDomain { point: [f64; 3], domain: &'static str },

    #[error("eigensolver did not converge: {0}")]
    Eigensolver(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("filter diverged at t = {t} s: every importance weight underflowed (max log-weight {max_log_weight:.1})")]
    Divergence { t: f64, max_log_weight: f64 },

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unsupported format version {found} in {path} (reader supports major {supported})")]
    Version {
        path: String,
        found: String,
        supported: u32,
    },

    #[error("basis cache {path} does not match the configuration ({detail}); rerun `magslam basis`")]
    CacheMismatch { path: PathBuf, detail: String },

    /// Inputs that are individually valid but inconsistent with each other.
    #[error("inconsistent data: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 usage, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Config(_) => 2,
            Error::Format { .. }
            | Error::Data(_)
            | Error::Version { .. }
            | Error::CacheMismatch { .. }
            | Error::Io { .. }
            | Error::OutsideDomain { .. } => 3,
            Error::Eigensolver(_) | Error::Numerical(_) | Error::Divergence { .. } => 4,
        }
    }
}
