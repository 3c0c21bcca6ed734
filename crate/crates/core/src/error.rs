use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is rank deficient")]
    RankDeficient,
    #[error("point is infeasible (residual {0:.3e})")]
    InfeasiblePoint(f64),
    #[error("vector is not tangent (residual {0:.3e})")]
    NotTangent(f64),
    #[error("step leaves the retraction domain: {0}")]
    RetractionDomain(String),
    #[error("missing capability: {0}")]
    MissingCapability(&'static str),
    #[error("bundle state carries no frame")]
    MissingFrame,
    #[error("directions are based at different bundle states")]
    BaseMismatch,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("closed-shell model needs an even electron count, got {0}")]
    ClosedShellViolation(usize),
    #[error("degenerate spectrum: {0}")]
    Degenerate(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("two configuration sums coincide; catalog is ambiguous")]
    DegenerateSums,
    #[error("terminal matches {0} catalog entries")]
    AmbiguousMatch(usize),
    #[error("non-finite residual at iteration {0}")]
    Diverged(usize),
    #[error("constraint Jacobian lost full row rank")]
    RegularityViolation,
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), msg: err.to_string() }
    }
}
