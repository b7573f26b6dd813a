//! Time-domain split-step simulator for multimode WDM links.
//!
//! One run draws a circular block of random symbols per carrier, shapes
//! them into brick-wall channels, propagates the per-mode fields through
//! every span with a symmetric split-step of the coupled Manakov equations,
//! and demodulates each carrier behind a zero-forcing equaliser built from
//! the closed-form link transfer. The measured SNR is an independent check
//! on the analytic interference engine: same launch powers, same gains,
//! but nothing shared beyond the link description.
//!
//! Runs are deterministic in the master seed. A pair of runs that differ
//! only in [`SsfmOptions::ase`] shares its symbol streams exactly, so the
//! noise-free twin isolates nonlinear interference.

mod error;
pub(crate) mod fft;
pub mod grid;
pub mod prng;
pub mod propagate;
pub mod receive;
pub mod synth;

pub use error::SsfmError;
pub use grid::{SimGrid, SYMBOLS_PER_RUN};
pub use receive::CarrierSnr;
pub use synth::SymbolSet;

use fiberplan_core::SystemConfig;
use rustfft::FftPlanner;

/// Run controls independent of the link description.
#[derive(Debug, Clone)]
pub struct SsfmOptions {
    /// Seeds every random stream in the run, symbols and noise alike.
    pub master_seed: u64,
    /// Split steps per span.
    pub steps_per_span: usize,
    /// Add amplifier noise; switch off to isolate nonlinear interference.
    pub ase: bool,
}

impl Default for SsfmOptions {
    fn default() -> Self {
        Self { master_seed: 7, steps_per_span: 160, ase: true }
    }
}

const MIN_STEPS: usize = 4;

/// Simulates the whole link once and measures every carrier.
///
/// `powers` holds launch powers in watts indexed `channel * n_modes + mode`;
/// `gains` holds linear line-amplifier gains per span.
pub fn simulate(
    cfg: &SystemConfig,
    powers: &[f64],
    gains: &[f64],
    opts: &SsfmOptions,
) -> Result<Vec<CarrierSnr>, SsfmError> {
    validate(cfg, powers, gains, opts)?;
    let set = SymbolSet::from_moments(&cfg.constellation).ok_or(
        SsfmError::UnsupportedConstellation {
            mu4: cfg.constellation.mu4,
            mu6: cfg.constellation.mu6,
        },
    )?;
    let grid = SimGrid::for_config(cfg)?;
    let mut planner = FftPlanner::new();
    let (mut fields, tx) =
        synth::synthesise(cfg, &grid, set, powers, opts.master_seed, &mut planner);
    propagate::run_link(cfg, &grid, &mut fields, gains, opts, &mut planner);
    Ok(receive::measure(cfg, &grid, fields, &tx, gains, &mut planner))
}

/// Folds a fixed receiver noise power into a measured linear SNR.
pub fn with_receiver_noise(snr: f64, received_w: f64, receiver_noise_w: f64) -> f64 {
    1.0 / (1.0 / snr + receiver_noise_w / received_w)
}

fn validate(
    cfg: &SystemConfig,
    powers: &[f64],
    gains: &[f64],
    opts: &SsfmOptions,
) -> Result<(), SsfmError> {
    let end = cfg.n_spans() - 1;
    for lp in &cfg.link.lightpaths {
        if lp.first_span != 0 || lp.last_span != end {
            return Err(SsfmError::UnsupportedTopology {
                id: lp.id.clone(),
                first: lp.first_span,
                last: lp.last_span,
                end,
            });
        }
    }
    let slots = cfg.plan.n_channels * cfg.n_modes();
    if powers.len() != slots {
        return Err(SsfmError::ShapeMismatch(format!(
            "{} launch powers for {} carrier slots",
            powers.len(),
            slots
        )));
    }
    if gains.len() != cfg.n_spans() {
        return Err(SsfmError::ShapeMismatch(format!(
            "{} gains for {} spans",
            gains.len(),
            cfg.n_spans()
        )));
    }
    for carrier in cfg.carriers() {
        let p = powers[carrier.channel * cfg.n_modes() + carrier.mode];
        if !(p.is_finite() && p > 0.0) {
            return Err(SsfmError::ShapeMismatch(format!(
                "carrier (channel {}, mode {}) has non-positive launch power {p}",
                carrier.channel, carrier.mode
            )));
        }
    }
    if gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(SsfmError::ShapeMismatch("gains must be positive".into()));
    }
    if opts.steps_per_span < MIN_STEPS {
        return Err(SsfmError::TooFewSteps { steps: opts.steps_per_span, min: MIN_STEPS });
    }
    Ok(())
}
