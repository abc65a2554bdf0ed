use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters are outside the validated high-temperature region.
    #[error("outside validated high-temperature region: {0}")]
    Region(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical routine failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("memory budget exceeded: {0}")]
    Budget(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Region(_) => "region",
            Error::Validation(_) => "validation",
            Error::Numeric(_) => "numeric",
            Error::Budget(_) => "budget",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
