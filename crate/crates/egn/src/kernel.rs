//! Single-span four-wave-mixing kernel and its frequency integrals.
//!
//! The nonlinear field transfer of one span is eta = gamma~ * (exp((-a + j d)L) - 1)
//! / (-a + j d), with d the phase mismatch and a the combined attenuation of
//! the mixing waves. Its squared magnitude
//!
//! F(d) = [(1 - E)^2 + 4 E sin^2(d L / 2)] / (a^2 + d^2),   E = exp(-a L)
//!
//! must be integrated over frequency. F has a Lorentzian ridge of width a at
//! d = 0 and an oscillation of period 2 pi / L, both far narrower than a
//! channel bandwidth, so plain sampling cannot resolve them. Integration runs
//! per cell in mismatch space instead: the Lorentzian part has an exact
//! arctangent primitive and the oscillatory part uses Filon quadrature, so
//! the panel count follows the Lorentzian's shape rather than the phase.

use crate::beta::BetaProfile;

/// Phase change across a cell below which the integrand counts as smooth and
/// a midpoint sample suffices.
const SMOOTH_PHASE_LIMIT: f64 = 0.5;

/// Filon panel width as a fraction of max(alpha, delta); the Lorentzian
/// flattens as 1/delta^2, so panels widen geometrically away from the ridge.
const PANEL_FRACTION: f64 = 1.0 / 16.0;

/// Interference kernel of one span for a fixed (receiver mode, pump mode)
/// pair. `alpha` is the combined power attenuation of the mixing waves,
/// which for this pairing equals the pump mode's attenuation.
#[derive(Debug, Clone, Copy)]
pub struct SpanKernel {
    /// 1/km, > 0.
    pub alpha: f64,
    /// km.
    pub length: f64,
    attn: f64,
    one_minus_sq: f64,
    peak_num: f64,
}

impl SpanKernel {
    pub fn new(alpha: f64, length_km: f64) -> Self {
        assert!(alpha > 0.0 && length_km > 0.0, "kernel needs positive loss and length");
        let attn = (-alpha * length_km).exp();
        Self {
            alpha,
            length: length_km,
            attn,
            one_minus_sq: (1.0 - attn) * (1.0 - attn),
            peak_num: 1.0 + attn * attn,
        }
    }

    /// |eta|^2 / gamma~^2 at mismatch `delta` (rad/km), in km^2. Written in a
    /// cancellation-free form that stays exact through delta = 0.
    pub fn f_stable(&self, delta: f64) -> f64 {
        let s = (0.5 * delta * self.length).sin();
        (self.one_minus_sq + 4.0 * self.attn * s * s) / (self.alpha * self.alpha + delta * delta)
    }

    /// Exact integral of F over a mismatch interval.
    fn f_integral(&self, lo: f64, hi: f64) -> f64 {
        let lorentz = self.peak_num / self.alpha * atan_diff(hi / self.alpha, lo / self.alpha);
        lorentz - 2.0 * self.attn * self.cos_lorentz(lo, hi)
    }

    /// integral of cos(d L) / (a^2 + d^2) over [lo, hi] (lo <= hi).
    fn cos_lorentz(&self, lo: f64, hi: f64) -> f64 {
        if hi <= 0.0 {
            return self.cos_lorentz_pos(-hi, -lo);
        }
        if lo < 0.0 {
            return self.cos_lorentz_pos(0.0, -lo) + self.cos_lorentz_pos(0.0, hi);
        }
        self.cos_lorentz_pos(lo, hi)
    }

    /// Filon quadrature on [x1, x2], 0 <= x1 <= x2: per panel the Lorentzian
    /// is fitted by the quadratic through its endpoints and midpoint and
    /// integrated against cos(d L) in closed form, so accuracy does not
    /// depend on how many oscillation periods a panel spans.
    fn cos_lorentz_pos(&self, x1: f64, x2: f64) -> f64 {
        debug_assert!(0.0 <= x1 && x1 <= x2);
        let a2 = self.alpha * self.alpha;
        let h = |d: f64| 1.0 / (a2 + d * d);
        let l = self.length;
        let mut acc = 0.0;
        let mut left = x1;
        let mut h_left = h(left);
        while left < x2 {
            let right = (left + self.alpha.max(left) * PANEL_FRACTION).min(x2);
            let s = 0.5 * (right - left);
            let mid = 0.5 * (left + right);
            let (h_mid, h_right) = (h(mid), h(right));
            // h(mid + t) ~ c0 + c1 t + c2 t^2 on t in [-s, s].
            let c0 = h_mid;
            let c1 = (h_right - h_left) / (2.0 * s);
            let c2 = (h_right - 2.0 * h_mid + h_left) / (2.0 * s * s);
            let (sin_m, cos_m) = (l * mid).sin_cos();
            let (sin_s, cos_s) = (l * s).sin_cos();
            // Exact moments of cos(L (mid + t)) against 1, t, t^2 over [-s, s].
            let j0 = 2.0 * cos_m * sin_s / l;
            let j1 = -2.0 * sin_m * (sin_s - l * s * cos_s) / (l * l);
            let j2 = 2.0 * cos_m
                * ((s * s / l - 2.0 / (l * l * l)) * sin_s + 2.0 * s * cos_s / (l * l));
            acc += c0 * j0 + c1 * j1 + c2 * j2;
            left = right;
            h_left = h_right;
        }
        acc
    }

    /// integral of F(delta(u)) du over one cell, given the exact endpoint
    /// mismatches. `delta_mid` is only evaluated on the smooth branch.
    pub fn cell_integral(
        &self,
        du: f64,
        delta_left: f64,
        delta_right: f64,
        delta_mid: impl FnOnce() -> f64,
    ) -> f64 {
        let dd = delta_right - delta_left;
        if dd.abs() * self.length <= SMOOTH_PHASE_LIMIT {
            return self.f_stable(delta_mid()) * du;
        }
        let (lo, hi) = if delta_left < delta_right {
            (delta_left, delta_right)
        } else {
            (delta_right, delta_left)
        };
        du / (hi - lo) * self.f_integral(lo, hi)
    }
}

/// atan(b) - atan(a) without cancellation when both angles approach pi/2.
fn atan_diff(b: f64, a: f64) -> f64 {
    if a * b > 0.0 {
        ((b - a) / (1.0 + a * b)).atan()
    } else {
        b.atan() - a.atan()
    }
}

/// integral of F(delta(u, v, w)) du over the support of the receiver channel
/// against the conjugate-pump channel, for fixed pump frequencies (v, w).
///
/// `band_i` is the receiver band, `band_k` the conjugate pump band; the
/// mismatch polynomial couples receiver mode p at (u, v) and pump mode q at
/// (w, v + w - u). `cell_width` bounds the u discretization.
pub fn mismatch_u_integral(
    kernel: &SpanKernel,
    bp: &BetaProfile,
    bq: &BetaProfile,
    band_i: (f64, f64),
    band_k: (f64, f64),
    v: f64,
    w: f64,
    cell_width: f64,
) -> f64 {
    let lo = band_i.0.max(v + w - band_k.1);
    let hi = band_i.1.min(v + w - band_k.0);
    if hi <= lo {
        return 0.0;
    }
    let n = ((hi - lo) / cell_width).ceil().max(1.0) as usize;
    let du = (hi - lo) / n as f64;
    let pump_sum = v + w;
    let base = bp.eval(v) + bq.eval(w);
    let delta_at = |u: f64| base - bq.eval(pump_sum - u) - bp.eval(u);

    let mut acc = 0.0;
    let mut d_left = delta_at(lo);
    for c in 0..n {
        let u_right = if c + 1 == n { hi } else { lo + (c + 1) as f64 * du };
        let d_right = delta_at(u_right);
        let mid = lo + (c as f64 + 0.5) * du;
        acc += kernel.cell_integral(du, d_left, d_right, || delta_at(mid));
        d_left = d_right;
    }
    acc
}
