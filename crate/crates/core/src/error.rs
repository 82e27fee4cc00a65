use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// One of the effective-parameter physicality constraints failed.
    /// `constraint` names the violated quantity, `value` is its actual value.
    #[error("physicality violation: {constraint} = {value:.9}{detail}")]
    PhysicalityViolation {
        constraint: &'static str,
        value: f64,
        detail: String,
    },

    #[error("gain out of range: {0}")]
    GainOutOfRange(String),

    #[error("cutoff too small: {0}")]
    CutoffTooSmall(String),

    #[error("certification failure: {0}")]
    CertificationFailure(String),

    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn physicality(constraint: &'static str, value: f64, detail: impl Into<String>) -> Self {
        let detail = detail.into();
        let detail = if detail.is_empty() {
            detail
        } else {
            format!(" ({detail})")
        };
        Error::PhysicalityViolation {
            constraint,
            value,
            detail,
        }
    }
}
