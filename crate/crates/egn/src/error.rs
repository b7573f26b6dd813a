use thiserror::Error;

/// Failures of the interference engine.
#[derive(Debug, Error)]
pub enum EgnError {
    /// The semi-analytic kernel integrates the loss profile in closed form
    /// and requires strictly positive attenuation.
    #[error("interference tensors need positive attenuation on every mode (fiber '{fiber}')")]
    LosslessFiber { fiber: String },
    #[error("cache: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache file {path}: {reason}")]
    CacheFormat { path: String, reason: String },
}
