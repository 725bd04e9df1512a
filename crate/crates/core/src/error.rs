use thiserror::Error;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported parametric family `{0}`")]
    UnsupportedFamily(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate variable `{0}`: standard deviation is zero")]
    DegenerateVariable(String),

    #[error("matrix is singular (not positive definite) even after ridge regularization")]
    SingularMatrix,

    #[error("invalid metric: quadratic form {0} is negative beyond tolerance")]
    InvalidMetric(f64),

    #[error("invalid cluster count k={k} for n={n} individuals")]
    InvalidK { k: usize, n: usize },

    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::UnsupportedFamily(_) => "unsupported_family",
            Error::Domain(_) => "domain",
            Error::EmptyInput(_) => "empty_input",
            Error::Shape(_) => "shape",
            Error::DegenerateVariable(_) => "degenerate_variable",
            Error::SingularMatrix => "singular_matrix",
            Error::InvalidMetric(_) => "invalid_metric",
            Error::InvalidK { .. } => "invalid_k",
            Error::Parse { .. } => "parse",
            Error::Usage(_) => "usage",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
