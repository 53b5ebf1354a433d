use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerical(#[from] renyi_core::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for JSON error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Numerical(_) => "numerical",
            Error::Parse(_) => "parse",
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::Io(_) => "io",
        }
    }

    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }
}
