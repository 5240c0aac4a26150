use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} is not squarefree")]
    NotSquarefree(u64),

    #[error("discriminant mismatch: {0} vs {1}")]
    DiscriminantMismatch(i128, i128),

    #[error("element leaves the ring of integers: {0}")]
    NotIntegral(String),

    #[error("singular matrix")]
    Singular,

    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("cap exceeded: {what} = {value} > {cap}")]
    CapExceeded { what: &'static str, value: u64, cap: u64 },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
