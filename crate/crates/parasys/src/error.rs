use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("missing certificate: {0}")]
    MissingCertificate(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("linear solve failed at t = {t}: {msg}")]
    Solve { t: f64, msg: String },
    #[error("non-finite value produced at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension(_) | Error::Invalid(_) => 2,
            Error::MissingCertificate(_) | Error::Refused(_) => 1,
            Error::Solve { .. } | Error::NonFinite { .. } | Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
