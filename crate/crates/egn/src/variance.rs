//! Whole-link noise accumulation per carrier.
//!
//! Nonlinear interference generated on each traversed span (referred to the
//! span input) is scaled by the net gain from that point to the receiver and
//! summed incoherently. Amplified spontaneous emission follows the same
//! chain: the transmit booster's contribution crosses the whole path, each
//! line amplifier's only the remainder.

use std::collections::HashMap;

use fiberplan_core::units::PLANCK;
use fiberplan_core::{Carrier, SystemConfig};

use crate::xtensor::XTensorSet;

/// Which moment order of the symbol distribution a term stems from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NliKind {
    /// Second-moment (Gaussian) contribution; alone it is the GN prediction.
    Gn,
    /// Fourth-moment correction.
    Fon,
    /// Sixth-moment correction.
    Hon,
}

/// One interference term: noise on a span of the originating class equals
/// `coefficient * P(pumps[0]) * P(pumps[1]) * P(pumps[2])` with powers taken
/// at the span input, provided every pump is present on that span.
#[derive(Debug, Clone, Copy)]
pub struct NliTerm {
    pub kind: NliKind,
    /// Pump slots as channel * D + mode; repeated slots square or cube.
    pub pumps: [usize; 3],
    /// 1/W^2; includes moment factors and the tensor value.
    pub coefficient: f64,
}

/// Enumerates the nonzero interference terms feeding receiver slot (i2, p)
/// from spans of one class.
pub fn nli_terms(
    cfg: &SystemConfig,
    xt: &XTensorSet,
    class: usize,
    i2: usize,
    p: usize,
) -> Vec<NliTerm> {
    let n = cfg.plan.n_channels;
    let d = cfg.n_modes();
    let cums = cfg.channel_cumulants();
    let slot = |c: usize, m: usize| c * d + m;
    let mut terms = Vec::new();
    for q in 0..d {
        for k2 in 0..n {
            for m2 in 0..n {
                for n2 in 0..n {
                    let x = xt.xa(class, i2, p, k2, m2, n2, q);
                    if x == 0.0 {
                        continue;
                    }
                    terms.push(NliTerm {
                        kind: NliKind::Gn,
                        pumps: [slot(k2, q), slot(m2, q), slot(n2, p)],
                        coefficient: 0.75 * cums[k2].k1 * cums[m2].k1 * cums[n2].k1 * x,
                    });
                }
            }
        }
        for k2 in 0..n {
            if cums[k2].k2 == 0.0 {
                continue;
            }
            for n2 in 0..n {
                let xb = xt.xb(class, i2, p, k2, n2, q);
                if xb != 0.0 {
                    terms.push(NliTerm {
                        kind: NliKind::Fon,
                        pumps: [slot(k2, q), slot(k2, q), slot(n2, p)],
                        coefficient: 1.25 * cums[k2].k2 * cums[n2].k1 * xb,
                    });
                }
                let xc = xt.xc(class, i2, p, k2, n2, q);
                if xc != 0.0 {
                    terms.push(NliTerm {
                        kind: NliKind::Fon,
                        pumps: [slot(k2, p), slot(k2, q), slot(n2, q)],
                        coefficient: 0.25 * cums[k2].k2 * cums[n2].k1 * xc,
                    });
                }
            }
        }
        for n2 in 0..n {
            if cums[n2].k3 == 0.0 {
                continue;
            }
            let xd = xt.xd(class, i2, p, n2, q);
            if xd != 0.0 {
                terms.push(NliTerm {
                    kind: NliKind::Hon,
                    pumps: [slot(n2, q), slot(n2, q), slot(n2, p)],
                    coefficient: 0.25 * cums[n2].k3 * xd,
                });
            }
        }
    }
    terms
}

/// Per-carrier noise variances at the receiver, in W.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoiseBreakdown {
    pub ase_w: f64,
    pub gn_w: f64,
    pub fon_w: f64,
    pub hon_w: f64,
    pub receiver_w: f64,
}

impl NoiseBreakdown {
    /// Full nonlinear interference (corrected prediction).
    pub fn nli_w(&self) -> f64 {
        self.gn_w + self.fon_w + self.hon_w
    }

    pub fn total_w(&self) -> f64 {
        self.ase_w + self.nli_w() + self.receiver_w
    }
}

/// `pref[s]` = net power gain accumulated before span s (loss times amplifier
/// per traversed span), so the gain over [s1, s2) is `pref[s2] / pref[s1]`.
fn net_prefix(cfg: &SystemConfig, gains: &[f64]) -> Vec<f64> {
    let mut pref = Vec::with_capacity(cfg.n_spans() + 1);
    pref.push(1.0);
    for s in 0..cfg.n_spans() {
        let t = cfg.span_transmittance(s);
        pref.push(pref[s] * t * gains[s]);
    }
    pref
}

/// First span of the lightpath occupying each slot, if any.
fn slot_starts(cfg: &SystemConfig) -> Vec<Option<usize>> {
    let d = cfg.n_modes();
    let mut starts = vec![None; cfg.plan.n_channels * d];
    for lp in &cfg.link.lightpaths {
        for &(ch, mode) in &lp.carriers {
            starts[ch * d + mode] = Some(lp.first_span);
        }
    }
    starts
}

/// Amplified-spontaneous-emission variance reaching the given carrier, in W.
pub fn ase_variance(cfg: &SystemConfig, gains: &[f64], carrier: Carrier) -> f64 {
    let (a, b) = cfg.carrier_spans(&carrier);
    let pref = net_prefix(cfg, gains);
    let hv_b = PLANCK * cfg.plan.center_frequency * cfg.plan.bandwidth;
    // The booster shares the noise figure of the first line amplifier.
    let mut ase = cfg.span_amplifier(a).noise_figure
        * (cfg.link.booster_gain - 1.0)
        * hv_b
        * (pref[b + 1] / pref[a]);
    for s in a..=b {
        ase += cfg.span_amplifier(s).noise_figure
            * (gains[s] - 1.0)
            * hv_b
            * (pref[b + 1] / pref[s + 1]);
    }
    ase
}

/// Full noise breakdown for one carrier given launch powers per slot (W, at
/// the booster output) and linear amplifier gains per span.
pub fn noise_breakdown(
    cfg: &SystemConfig,
    xt: &XTensorSet,
    powers: &[f64],
    gains: &[f64],
    carrier: Carrier,
) -> NoiseBreakdown {
    let (a, b) = cfg.carrier_spans(&carrier);
    let pref = net_prefix(cfg, gains);
    let starts = slot_starts(cfg);
    let mut term_cache: HashMap<usize, Vec<NliTerm>> = HashMap::new();

    let mut out = NoiseBreakdown {
        ase_w: ase_variance(cfg, gains, carrier),
        receiver_w: cfg.receiver_noise,
        ..Default::default()
    };
    for s in a..=b {
        let class = xt.class_of_span(s);
        let terms = term_cache
            .entry(class)
            .or_insert_with(|| nli_terms(cfg, xt, class, carrier.channel, carrier.mode));
        let occ = cfg.span_occupancy(s);
        let net_rx = pref[b + 1] / pref[s];
        for t in terms.iter() {
            let mut contrib = t.coefficient * net_rx;
            for &slot in &t.pumps {
                if !occ[slot] {
                    contrib = 0.0;
                    break;
                }
                contrib *= powers[slot] * pref[s] / pref[starts[slot].expect("occupied slot has a lightpath")];
            }
            match t.kind {
                NliKind::Gn => out.gn_w += contrib,
                NliKind::Fon => out.fon_w += contrib,
                NliKind::Hon => out.hon_w += contrib,
            }
        }
    }
    out
}

/// Everything the planner reports about one carrier.
#[derive(Debug, Clone)]
pub struct CarrierReport {
    pub carrier: Carrier,
    pub launch_w: f64,
    pub received_w: f64,
    pub noise: NoiseBreakdown,
    pub snr: f64,
    /// 10 log10(snr / required snr) of the owning lightpath.
    pub margin_db: f64,
}

/// Evaluates every assigned carrier of the system.
pub fn snr_report(
    cfg: &SystemConfig,
    xt: &XTensorSet,
    powers: &[f64],
    gains: &[f64],
) -> Vec<CarrierReport> {
    let d = cfg.n_modes();
    let pref = net_prefix(cfg, gains);
    cfg.carriers()
        .into_iter()
        .map(|carrier| {
            let (a, b) = cfg.carrier_spans(&carrier);
            let slot = carrier.channel * d + carrier.mode;
            let launch_w = powers[slot];
            let received_w = launch_w * pref[b + 1] / pref[a];
            let noise = noise_breakdown(cfg, xt, powers, gains, carrier);
            let snr = received_w / noise.total_w();
            let required = cfg.link.lightpaths[carrier.lightpath].required_snr;
            CarrierReport {
                carrier,
                launch_w,
                received_w,
                noise,
                snr,
                margin_db: 10.0 * (snr / required).log10(),
            }
        })
        .collect()
}

/// Loss-compensating gains capped at each amplifier's limit.
pub fn transparent_gains(cfg: &SystemConfig) -> Vec<f64> {
    (0..cfg.n_spans()).map(|s| cfg.transparent_gain(s)).collect()
}
