//! Receive side: zero-forcing equalisation from the closed-form link
//! transfer, a brick-wall matched filter per channel, a least-squares
//! carrier phase estimate per polarisation, and the pooled SNR.
//!
//! Processing is fully circular: the block wraps, so no edge symbols need
//! excluding and every symbol counts toward the estimate.

use fiberplan_core::{Carrier, SystemConfig};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::fft::FftPair;
use crate::grid::{SimGrid, SYMBOLS_PER_RUN};
use crate::propagate::mode_beta;
use crate::synth::TxSlot;

/// Measured quality of one carrier after the full link.
#[derive(Debug, Clone)]
pub struct CarrierSnr {
    pub carrier: Carrier,
    pub launch_w: f64,
    /// Signal power arriving at the receiver, W.
    pub received_w: f64,
    /// Linear SNR of the equalised symbols; excludes receiver noise.
    pub snr: f64,
}

/// Closed-form end-to-end transfer of each mode at every grid bin: the
/// dispersion phase of every span plus the net amplitude of span loss and
/// line amplification.
fn link_transfer(cfg: &SystemConfig, grid: &SimGrid, gains: &[f64]) -> Vec<Vec<Complex64>> {
    (0..cfg.n_modes())
        .map(|m| {
            let amp = net_power_gain(cfg, gains, m).sqrt();
            (0..grid.n_samples)
                .map(|k| {
                    let f = grid.bin_offset_hz(k);
                    let phase: f64 = (0..cfg.n_spans())
                        .map(|s| {
                            mode_beta(&cfg.span_fiber(s).modes[m], f)
                                * cfg.link.spans[s].length_km
                        })
                        .sum();
                    Complex64::from_polar(amp, -phase)
                })
                .collect()
        })
        .collect()
}

/// Net power gain of one mode across spans and line amplifiers. The booster
/// sits before the launch reference plane and does not appear.
pub(crate) fn net_power_gain(cfg: &SystemConfig, gains: &[f64], mode: usize) -> f64 {
    let mut g = 1.0;
    for s in 0..cfg.n_spans() {
        let fiber = cfg.span_fiber(s);
        g *= (-fiber.modes[mode].attenuation * cfg.link.spans[s].length_km).exp() * gains[s];
    }
    g
}

/// Equalises and demodulates every transmitted carrier.
pub(crate) fn measure(
    cfg: &SystemConfig,
    grid: &SimGrid,
    mut fields: Vec<Vec<Complex64>>,
    tx: &[TxSlot],
    gains: &[f64],
    planner: &mut FftPlanner<f64>,
) -> Vec<CarrierSnr> {
    let block = FftPair::new(planner, grid.n_samples);
    let sym = FftPair::new(planner, SYMBOLS_PER_RUN);
    for field in fields.iter_mut() {
        block.forward(field);
    }
    let transfer = link_transfer(cfg, grid, gains);
    tx.iter()
        .map(|slot| {
            let (ch, mode) = (slot.carrier.channel, slot.carrier.mode);
            let scale = grid.sps as f64 * (0.5 * slot.launch_w).sqrt();
            let mut signal = 0.0;
            let mut noise = 0.0;
            for pol in 0..2 {
                let spec = &fields[mode * 2 + pol];
                let h = &transfer[mode];
                let mut y: Vec<Complex64> = (0..SYMBOLS_PER_RUN)
                    .map(|k| {
                        let b = grid.abs_bin(ch, k);
                        spec[b] / (h[b] * scale)
                    })
                    .collect();
                sym.inverse(&mut y);
                let reference = &slot.symbols[pol];
                let mut cross = Complex64::new(0.0, 0.0);
                let mut ref_power = 0.0;
                for (yy, ss) in y.iter().zip(reference.iter()) {
                    cross += yy * ss.conj();
                    ref_power += ss.norm_sqr();
                }
                let h_hat = cross / ref_power;
                noise += y
                    .iter()
                    .zip(reference.iter())
                    .map(|(yy, ss)| (yy - h_hat * ss).norm_sqr())
                    .sum::<f64>();
                signal += h_hat.norm_sqr() * ref_power;
            }
            CarrierSnr {
                carrier: slot.carrier,
                launch_w: slot.launch_w,
                received_w: slot.launch_w * net_power_gain(cfg, gains, mode),
                snr: signal / noise,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthesise, SymbolSet};
    use crate::testutil::{build, transparent_gains, TestLink};
    use crate::SsfmOptions;

    // A global phase rotation of the received field models an uncompensated
    // carrier phase; the least-squares estimate must absorb it exactly.
    #[test]
    fn carrier_phase_is_absorbed_by_the_estimator() {
        let cfg = build(&TestLink { n_channels: 1, ..TestLink::default() });
        let grid = SimGrid::for_config(&cfg).unwrap();
        let gains = transparent_gains(&cfg);
        let mut planner = FftPlanner::new();
        let powers = [1.0e-3];
        let opts = SsfmOptions { ase: true, ..SsfmOptions::default() };
        let (mut fields, tx) =
            synthesise(&cfg, &grid, SymbolSet::Psk4, &powers, 21, &mut planner);
        crate::propagate::run_link(&cfg, &grid, &mut fields, &gains, &opts, &mut planner);
        let rotated: Vec<Vec<Complex64>> = fields
            .iter()
            .map(|f| {
                let r = Complex64::from_polar(1.0, 1.234);
                f.iter().map(|x| x * r).collect()
            })
            .collect();
        let plain = measure(&cfg, &grid, fields, &tx, &gains, &mut planner);
        let spun = measure(&cfg, &grid, rotated, &tx, &gains, &mut planner);
        let (a, b) = (plain[0].snr, spun[0].snr);
        assert!((a - b).abs() < 1e-9 * a, "snr {a} changed to {b} under rotation");
    }
}
