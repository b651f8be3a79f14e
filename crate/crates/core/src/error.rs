use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input fell outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),
    /// A computation produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// The box-conditioned mixture sampler could not find enough mass inside the box.
    #[error("degenerate support: acceptance rate {rate:.2e} after {attempts} attempts")]
    DegenerateSupport { rate: f64, attempts: u64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// No mixture restart reached the chance level; carries the best candidate.
    #[error("no mixture candidate reached the chance level (best chance {:.6})", .0.chance)]
    GmmInfeasible(Box<crate::gmm::GmmCandidate>),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Config(err.to_string())
    }
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) | Error::GmmInfeasible(_) => 3,
            Error::Numeric(_) | Error::DegenerateSupport { .. } => 4,
            Error::Domain(_) | Error::Config(_) | Error::Io(_) => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
