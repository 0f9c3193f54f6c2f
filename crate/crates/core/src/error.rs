use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The variants are grouped into classes by [`Error::class`]; the CLI maps
/// each class onto a stable process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid order: k = {k} but dimension n = {n}")]
    InvalidOrder { k: usize, n: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point outside cone: inequality #{index} has value {value:e}")]
    ConeViolation { index: usize, value: f64 },

    #[error("admissibility failure at node {node}: eigenvalues {eigenvalues:?}, cone margin {margin:e}")]
    Admissibility {
        node: usize,
        eigenvalues: Vec<f64>,
        margin: f64,
    },

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations: residual {residual:e}, last step factor {damping:e}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        damping: f64,
    },

    #[error("continuation stuck: step fell below {min_step:e} at t = {last_t}")]
    ContinuationStuck { last_t: f64, min_step: f64 },

    #[error("capability error: {0}")]
    Capability(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{} configuration error(s):\n{}", .0.len(), .0.join("\n"))]
    Config(Vec<String>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes with a stable exit code each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Admissibility,
    NonConvergence,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Admissibility => 3,
            ErrorClass::NonConvergence => 4,
            ErrorClass::Io => 5,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidOrder { .. }
            | Error::InvalidInput(_)
            | Error::Capability(_)
            | Error::Usage(_)
            | Error::Config(_) => ErrorClass::Config,
            Error::ConeViolation { .. } | Error::Admissibility { .. } => ErrorClass::Admissibility,
            Error::Numerical { .. }
            | Error::NonConvergence { .. }
            | Error::ContinuationStuck { .. } => ErrorClass::NonConvergence,
            Error::Io { .. } | Error::Format(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
