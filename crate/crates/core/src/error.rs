use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {value} outside domain ({lower}, {upper}): violates the {bound} bound")]
    Domain {
        value: f64,
        lower: f64,
        upper: f64,
        bound: &'static str,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid moment sequence: leading minor {minor} is not positive (pivot {pivot:e})")]
    InvalidMomentSequence { minor: usize, pivot: f64 },
    #[error("construction rejected: condition lhs {lhs:e} <= rhs {rhs:e}")]
    ConstructionRejected { lhs: f64, rhs: f64 },
    #[error("unsupported mixing spec: {0}")]
    UnsupportedSpec(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
