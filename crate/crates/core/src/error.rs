use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unknown parameter key `{0}`")]
    UnknownKey(String),

    #[error("parameter file: {0}")]
    Parse(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failed at t = {t:e}: {reason} (last state {state:?})")]
    IntegrationFailure { t: f64, state: Vec<f64>, reason: String },

    #[error("no section crossing before t = {t_max:e}")]
    Timeout { t_max: f64 },

    #[error("no periodic attractor: {0}")]
    NoAttractor(String),

    #[error("landmark missing: {0}")]
    LandmarkMissing(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("slice c_t = {c_t} does not meet the critical manifold twice")]
    SliceEmpty { c_t: f64 },

    #[error("singular reduced flow: {0}")]
    Singularity(String),

    #[error("no upper bound: {0}")]
    NoBound(String),

    #[error("root not bracketed on [{a}, {b}]")]
    NotBracketed { a: f64, b: f64 },

    #[error("Newton iteration failed: {0}")]
    NewtonFailure(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
