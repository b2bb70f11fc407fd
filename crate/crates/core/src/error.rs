use thiserror::Error;

/// Error type shared by every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("lattice mismatch: {0} vs {1}")]
    LatticeMismatch(String, String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// The blow-up denominator crossed zero. Carries the bracketing
    /// interval of the blow-up time t*.
    #[error("solution blows up inside t in [{lo}, {hi}]")]
    BlowUp { lo: f64, hi: f64 },

    #[error("certification failure: {0}")]
    Certification(String),

    #[error("envelope violation: {0}")]
    Envelope(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Invariant(_) | Error::Domain(_) | Error::LatticeMismatch(..) => 3,
            Error::Certification(_) => 4,
            Error::BlowUp { .. } => 5,
            Error::Quadrature(_) => 6,
            Error::Envelope(_) => 7,
            Error::Io(_) | Error::Json(_) => 3,
        }
    }
}
