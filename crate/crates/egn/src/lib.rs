//! Frequency-domain nonlinear-interference engine.
//!
//! Computes per-carrier noise variances for multimode WDM links from
//! precomputed four-wave-mixing interference tensors, split into the
//! Gaussian contribution and the fourth/sixth-moment corrections, plus
//! amplifier noise accumulated along each lightpath.

pub mod beta;
pub mod cache;
pub mod kernel;
pub mod montecarlo;
pub mod variance;
pub mod xtensor;

mod error;

pub use cache::{load_or_build, CacheStatus};
pub use error::EgnError;
pub use variance::{
    ase_variance, nli_terms, noise_breakdown, snr_report, transparent_gains, CarrierReport,
    NliKind, NliTerm, NoiseBreakdown,
};
pub use xtensor::{SpanClass, XTensorSet};
