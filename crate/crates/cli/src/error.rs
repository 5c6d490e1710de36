use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid spec: {0}")]
    Parse(String),
    #[error("invalid spec at `{key}`: {message}")]
    Schema { key: String, message: String },
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Solver(#[from] dielectric::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
