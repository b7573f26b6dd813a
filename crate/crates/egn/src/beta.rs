//! Per-mode propagation constants as polynomials in frequency.

use std::f64::consts::TAU;

use fiberplan_core::ModeSpec;

/// Cubic dispersion profile of one spatial mode. Frequencies are baseband
/// offsets in Hz; values come out in rad/km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaProfile {
    /// rad/km.
    pub beta0: f64,
    /// s/km.
    pub beta1: f64,
    /// s^2/km.
    pub beta2: f64,
    /// s^3/km.
    pub beta3: f64,
}

impl BetaProfile {
    pub fn from_mode(m: &ModeSpec) -> Self {
        Self { beta0: m.beta0, beta1: m.beta1, beta2: m.beta2, beta3: m.beta3 }
    }

    /// beta(f) = beta0 + beta1 w + beta2/2 w^2 + beta3/6 w^3, w = 2 pi f.
    pub fn eval(&self, f: f64) -> f64 {
        let w = TAU * f;
        self.beta0 + w * (self.beta1 + w * (0.5 * self.beta2 + w * self.beta3 / 6.0))
    }

    /// d beta / df in rad/km per Hz.
    pub fn slope(&self, f: f64) -> f64 {
        let w = TAU * f;
        TAU * (self.beta1 + w * (self.beta2 + 0.5 * self.beta3 * w))
    }
}

/// Phase mismatch of the four-wave product carried on modes (p, q):
/// receiver mode p samples frequency u, its intra-mode pump sits at v,
/// the mode-q pump pair sits at w and v + w - u. Result in rad/km.
pub fn phase_mismatch(bp: &BetaProfile, bq: &BetaProfile, u: f64, v: f64, w: f64) -> f64 {
    bp.eval(v) + bq.eval(w) - bq.eval(v + w - u) - bp.eval(u)
}
