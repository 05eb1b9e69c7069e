use thiserror::Error;

/// Errors shared by every solver module.
///
/// Configuration-class variants (`Config`, `DomainTooSmall`, `Ingestion`,
/// `Contract`, `ShapeMismatch`, `EmptySet`, `Parse`) mean the input was
/// unusable; the numerical variants mean a run started and broke down.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty point set: {0}")]
    EmptySet(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("|∇u|^p overflowed the f64 range; rescale the data or lower p")]
    EnergyOverflow,

    #[error("estimation failure: {0}")]
    Estimation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than a numerical breakdown.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::DomainTooSmall(_)
                | Error::Ingestion(_)
                | Error::Contract(_)
                | Error::ShapeMismatch(_)
                | Error::EmptySet(_)
                | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
