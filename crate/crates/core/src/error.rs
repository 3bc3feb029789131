use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("half-wave plate angle {0} rad is not one of the protocol settings 0, pi/2")]
    InvalidAngle(f64),
    #[error("invalid photon state: {0}")]
    InvalidState(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty tally: {0}")]
    EmptyTally(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable category, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) | Error::InvalidAngle(_) | Error::InvalidArgument(_) => "validation",
            Error::InvalidState(_) => "state",
            Error::EmptyTally(_) => "empty-tally",
            Error::Fit(_) => "fit",
            Error::Io(_) => "io",
            Error::Json(_) | Error::Csv(_) => "serialization",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
