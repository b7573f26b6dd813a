//! Monte Carlo cross-check estimator for interference tensor entries.
//!
//! Estimates single tensor entries by importance sampling, independently of
//! the deterministic quadrature (only the closed-form span kernel is shared).
//! The proposal in the receiver frequency mixes a uniform draw with truncated
//! Cauchy components centred on the mismatch ridges, with widths matching the
//! kernel's Lorentzian. Equal modes have two exact ridges (at each pump
//! frequency); unequal modes have a single walk-off ridge found by Newton.

use fiberplan_core::SystemConfig;
use rand::Rng;

use crate::beta::BetaProfile;
use crate::kernel::SpanKernel;

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Estimates the primary tensor entry (i2, p, k2, m2, n2, q) for a span of
/// the given fiber and length.
#[allow(clippy::too_many_arguments)]
pub fn estimate_entry(
    cfg: &SystemConfig,
    fiber: usize,
    length_km: f64,
    i2: usize,
    p: usize,
    k2: usize,
    m2: usize,
    n2: usize,
    q: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> McEstimate {
    let plan = &cfg.plan;
    let f = &cfg.fibers[fiber];
    let bp = BetaProfile::from_mode(&f.modes[p]);
    let bq = BetaProfile::from_mode(&f.modes[q]);
    let kernel = SpanKernel::new(f.modes[q].attenuation, length_km);
    let gamma_tilde = if p == q {
        8.0 / 9.0 * f.gamma * f.coupling[p][p]
    } else {
        4.0 / 3.0 * f.gamma * f.coupling[p][q]
    };

    let b = plan.bandwidth;
    let band_i = plan.channel_band(i2);
    let band_k = plan.channel_band(k2);
    let band_m = plan.channel_band(m2);
    let band_n = plan.channel_band(n2);
    let (u0, u1) = band_i;

    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for _ in 0..samples {
        let v = rng.gen_range(band_n.0..band_n.1);
        let w = rng.gen_range(band_m.0..band_m.1);
        let pump_sum = v + w;
        // Receiver frequencies whose conjugate pump stays inside its band;
        // empty means this (v, w) slice contributes exactly zero.
        let lo = u0.max(pump_sum - band_k.1);
        let hi = u1.min(pump_sum - band_k.0);
        if hi <= lo {
            continue;
        }
        let base = bp.eval(v) + bq.eval(w);
        let delta_at = |u: f64| base - bq.eval(pump_sum - u) - bp.eval(u);
        let slope_at = |u: f64| bq.slope(pump_sum - u) - bp.slope(u);

        // Ridge centres. Equal modes: the mismatch vanishes identically at
        // u = v and u = w. Unequal modes: one walk-off root, by clamped
        // Newton (any fixed point keeps the mixture a valid proposal, only
        // the variance depends on it).
        let (center_buf, n_centers) = if p == q {
            ([v, w], 2)
        } else {
            let mut u_star = 0.5 * (lo + hi);
            for _ in 0..30 {
                let s = slope_at(u_star);
                if s == 0.0 {
                    break;
                }
                u_star = (u_star - delta_at(u_star) / s).clamp(lo - b, hi + b);
            }
            ([u_star, 0.0], 1)
        };
        let centers = &center_buf[..n_centers];
        let cauchy_weight = 0.5 / centers.len() as f64;
        // Per component: centre, Lorentzian width, truncation angles.
        let mut comps = [(0.0f64, 0.0f64, 0.0f64, 0.0f64); 2];
        for (slot, &c) in comps.iter_mut().zip(centers) {
            let mut scale = kernel.alpha / slope_at(c).abs();
            if !scale.is_finite() || !(0.0..=b).contains(&scale) {
                scale = b;
            }
            *slot = (c, scale, ((lo - c) / scale).atan(), ((hi - c) / scale).atan());
        }
        let comps = &comps[..centers.len()];

        let toss = rng.gen::<f64>();
        let u = if toss < 0.5 {
            rng.gen_range(lo..hi)
        } else {
            let (c, scale, ta, tb) = comps[((toss - 0.5) / cauchy_weight) as usize % comps.len()];
            c + scale * rng.gen_range(ta..tb).tan()
        };
        if !(lo..=hi).contains(&u) {
            continue; // tan/atan rounding pushed the draw out by an ulp
        }
        let mut pdf = 0.5 / (hi - lo);
        for &(c, scale, ta, tb) in comps {
            let t = (u - c) / scale;
            pdf += cauchy_weight / (scale * (1.0 + t * t) * (tb - ta));
        }
        let val = kernel.f_stable(delta_at(u)) / pdf;
        acc += val;
        acc2 += val * val;
    }
    let n = samples as f64;
    let mean = acc / n;
    let var = (acc2 / n - mean * mean).max(0.0);
    // v and w each average over a bandwidth; the u integral is explicit.
    let norm = gamma_tilde * gamma_tilde / b;
    McEstimate { value: norm * mean, stderr: norm * (var / n).sqrt() }
}
