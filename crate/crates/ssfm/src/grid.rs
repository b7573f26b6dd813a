//! Discrete simulation grid: one circular block of symbols, oversampled so
//! that every channel plus the strongest mixing wings fit without aliasing
//! back into an occupied band.
//!
//! The grid resolution is `symbol_rate / SYMBOLS_PER_RUN`, so each channel
//! occupies exactly `SYMBOLS_PER_RUN` bins and the transmit spectrum maps
//! one-to-one onto symbol-block FFT bins.

use fiberplan_core::SystemConfig;

use crate::error::SsfmError;

/// Symbols per carrier per run; one FFT block.
pub const SYMBOLS_PER_RUN: usize = 4096;

/// Smallest oversampling factor; generous for a single channel.
const MIN_SPS: usize = 8;

/// Hard cap on oversampling; wider plans are rejected, not simulated.
const MAX_SPS: usize = 256;

/// Frequency/time grid shared by every stage of a run.
#[derive(Debug, Clone)]
pub struct SimGrid {
    /// Samples per symbol; a power of two.
    pub sps: usize,
    /// Samples in the block, `SYMBOLS_PER_RUN * sps`.
    pub n_samples: usize,
    /// Grid resolution, Hz.
    pub df: f64,
    /// Simulated bandwidth, Hz.
    pub sample_rate: f64,
    /// Channel centre offsets in grid bins.
    center_bins: Vec<i64>,
}

impl SimGrid {
    pub fn for_config(cfg: &SystemConfig) -> Result<Self, SsfmError> {
        let plan = &cfg.plan;
        let rs = plan.symbol_rate;
        if (plan.bandwidth - rs).abs() > 1e-6 * rs {
            return Err(SsfmError::BandwidthMismatch {
                bandwidth_hz: plan.bandwidth,
                symbol_rate_hz: rs,
            });
        }
        // Signal extent plus one extra band per side for four-wave wings.
        let needed = plan.n_channels.saturating_sub(1) as f64 * plan.spacing + 2.0 * plan.bandwidth;
        let mut sps = MIN_SPS;
        while (sps as f64) * rs < needed {
            sps *= 2;
            if sps > MAX_SPS {
                return Err(SsfmError::GridTooWide {
                    needed_ghz: needed / 1e9,
                    cap_ghz: MAX_SPS as f64 * rs / 1e9,
                });
            }
        }
        let df = rs / SYMBOLS_PER_RUN as f64;
        let center_bins = (0..plan.n_channels)
            .map(|ch| {
                let offset = plan.channel_offset(ch);
                let bins = offset / df;
                if (bins - bins.round()).abs() > 1e-6 {
                    return Err(SsfmError::IncommensurateGrid {
                        channel: ch,
                        offset_hz: offset,
                        df_hz: df,
                    });
                }
                Ok(bins.round() as i64)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            sps,
            n_samples: SYMBOLS_PER_RUN * sps,
            df,
            sample_rate: rs * sps as f64,
            center_bins,
        })
    }

    /// Grid bin holding symbol-spectrum bin `sym_bin` of channel `ch`.
    pub fn abs_bin(&self, ch: usize, sym_bin: usize) -> usize {
        let half = (SYMBOLS_PER_RUN / 2) as i64;
        let base = sym_bin as i64;
        let signed = if base < half { base } else { base - SYMBOLS_PER_RUN as i64 };
        (self.center_bins[ch] + signed).rem_euclid(self.n_samples as i64) as usize
    }

    /// Signed frequency offset of grid bin `k`, Hz.
    pub fn bin_offset_hz(&self, k: usize) -> f64 {
        let n = self.n_samples as i64;
        let b = k as i64;
        let signed = if b < n / 2 { b } else { b - n };
        signed as f64 * self.df
    }
}
