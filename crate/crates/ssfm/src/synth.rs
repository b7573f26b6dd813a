//! Transmit side: random symbols per carrier, shaped into brick-wall
//! channels directly in the frequency domain.
//!
//! Each carrier takes the FFT of its unit-power symbol block and drops it
//! into the grid bins of its channel, scaled by `sps * sqrt(p/2)` per
//! polarisation. That scaling makes the time-domain block carry exactly
//! half the launch power per polarisation (Parseval; exact for constant
//! modulus symbols, in expectation otherwise).

use fiberplan_core::{Carrier, ConstellationMoments, SystemConfig};
use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::fft::FftPair;
use crate::grid::{SimGrid, SYMBOLS_PER_RUN};
use crate::prng;

/// Symbol families the transmitter can draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolSet {
    Psk4,
    Gaussian,
    Qam16,
}

impl SymbolSet {
    /// Finds the family with matching moments, if any.
    pub fn from_moments(m: &ConstellationMoments) -> Option<Self> {
        let close = |a: ConstellationMoments, b: &ConstellationMoments| {
            (a.mu2 - b.mu2).abs() < 1e-9 && (a.mu4 - b.mu4).abs() < 1e-9 && (a.mu6 - b.mu6).abs() < 1e-9
        };
        [
            (ConstellationMoments::psk(), Self::Psk4),
            (ConstellationMoments::gaussian(), Self::Gaussian),
            (ConstellationMoments::qam16(), Self::Qam16),
        ]
        .into_iter()
        .find(|(p, _)| close(*p, m))
        .map(|(_, s)| s)
    }

    /// Draws `n` symbols with unit mean power.
    pub fn draw(&self, rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| match self {
                Self::Psk4 => {
                    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;
                    let re = if rng.gen::<bool>() { R } else { -R };
                    let im = if rng.gen::<bool>() { R } else { -R };
                    Complex64::new(re, im)
                }
                Self::Gaussian => complex_gaussian(rng, 1.0),
                Self::Qam16 => {
                    const LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
                    let s = 0.1f64.sqrt();
                    let re = LEVELS[rng.gen_range(0..4)] * s;
                    let im = LEVELS[rng.gen_range(0..4)] * s;
                    Complex64::new(re, im)
                }
            })
            .collect()
    }
}

/// One circular complex Gaussian sample with mean square `variance`.
pub fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let u = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let r = (-variance * u.ln()).sqrt();
    let theta = std::f64::consts::TAU * rng.gen::<f64>();
    Complex64::from_polar(r, theta)
}

/// Reference symbols of one transmitted carrier.
pub struct TxSlot {
    pub carrier: Carrier,
    pub launch_w: f64,
    /// Unit-power reference symbols per polarisation.
    pub symbols: [Vec<Complex64>; 2],
}

/// Builds the launch-power fields, one waveform per (mode, polarisation),
/// indexed `mode * 2 + pol`. Powers are indexed `channel * n_modes + mode`.
pub fn synthesise(
    cfg: &SystemConfig,
    grid: &SimGrid,
    set: SymbolSet,
    powers: &[f64],
    master_seed: u64,
    planner: &mut FftPlanner<f64>,
) -> (Vec<Vec<Complex64>>, Vec<TxSlot>) {
    let d = cfg.n_modes();
    let sym_fft = FftPair::new(planner, SYMBOLS_PER_RUN);
    let block_fft = FftPair::new(planner, grid.n_samples);
    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); grid.n_samples]; d * 2];
    let mut slots = Vec::new();
    for carrier in cfg.carriers() {
        let (ch, mode) = (carrier.channel, carrier.mode);
        let launch_w = powers[ch * d + mode];
        let scale = grid.sps as f64 * (0.5 * launch_w).sqrt();
        let mut symbols: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
        for (pol, slot_symbols) in symbols.iter_mut().enumerate() {
            let mut rng =
                prng::stream("symbols", master_seed, &[ch as u64, mode as u64, pol as u64]);
            let drawn = set.draw(&mut rng, SYMBOLS_PER_RUN);
            let mut spec = drawn.clone();
            sym_fft.forward(&mut spec);
            let dst = &mut spectra[mode * 2 + pol];
            for (k, v) in spec.iter().enumerate() {
                dst[grid.abs_bin(ch, k)] += scale * v;
            }
            *slot_symbols = drawn;
        }
        slots.push(TxSlot { carrier, launch_w, symbols });
    }
    for field in spectra.iter_mut() {
        block_fft.inverse(field);
    }
    (spectra, slots)
}
