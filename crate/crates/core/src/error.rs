use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain has no sites")]
    EmptyDomain,

    #[error("duplicate site {site}{}", line_suffix(*.line))]
    DuplicateSite { site: String, line: Option<usize> },

    #[error("expected {expected} coordinates, found {found}{}", line_suffix(*.line))]
    DimensionMismatch {
        expected: usize,
        found: usize,
        line: Option<usize>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid torus: {0}")]
    InvalidTorus(String),

    #[error("enumeration would yield {count} domains, above the cap of {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },

    #[error("operator dimension {dim} exceeds the eigensolver cap {cap}")]
    MatrixTooLarge { dim: usize, cap: usize },

    #[error("eigensolver did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("majorization precondition fails at index {index}: {lhs} < {rhs}")]
    MajorizationPrecondition { index: usize, lhs: f64, rhs: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
