//! Domain model for multimode WDM link planning.
//!
//! Everything downstream (interference engine, split-step simulator, power
//! allocator, CLI) works on the types defined here. Internally all quantities
//! are SI-linear: watts, hertz, kilometres, 1/km power attenuation. Decibel
//! and dBm forms exist only at the I/O boundary.

pub mod config;
pub mod error;
pub mod fingerprint;
pub mod moments;
pub mod types;
pub mod units;

pub use error::ConfigError;
pub use moments::{ConstellationMoments, Cumulants, KappaConvention};
pub use types::{
    AmplifierSpec, Carrier, ChannelPlan, FiberSpec, Lightpath, LinkTopology, ModeSpec,
    SolverKnobs, SpanSpec, SystemConfig,
};
