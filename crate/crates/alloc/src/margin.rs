//! Compiled log-domain margin constraints.
//!
//! A carrier's constraint value is ln(required SNR) + ln(total noise)
//! - ln(received signal), all at the receiver. In log coordinates every
//! noise addend is an exponential of an affine function of the log powers
//! and log gains, except the spontaneous-emission factor e^g - 1 of each
//! line amplifier, which keeps its exact form. Compilation folds the static
//! parts (tensor entries, moment factors, span transmittances) into one
//! coefficient per addend, so an evaluation costs one exp per addend plus a
//! prefix sum over spans; interference addends sharing a pump multiset are
//! merged. Evaluation is max-shifted to avoid overflow, and gradients come
//! from the same pass (gain derivatives accumulate into a difference array
//! because every addend touches a contiguous span range).
//!
//! Amplifier saturation is compiled alongside: the summed carrier power at
//! each span input, again an exponential of affine expressions.

use std::collections::BTreeMap;

use fiberplan_core::units::PLANCK;
use fiberplan_core::{Carrier, SolverKnobs, SystemConfig};
use fiberplan_egn::variance::nli_terms;
use fiberplan_egn::XTensorSet;

use crate::AllocError;

#[derive(Debug, Clone, Copy, PartialEq)]
enum AddendKind {
    /// Pump-power product generated on one span.
    Interference,
    /// Transmit booster contribution crossing the whole lightpath.
    BoosterAse,
    /// One line amplifier's contribution, carrying the e^g - 1 factor.
    LineAse,
}

#[derive(Debug, Clone)]
struct Addend {
    /// Static exponent part: coefficient magnitude and transmittances.
    log_c: f64,
    sign: f64,
    kind: AddendKind,
    /// Generating span (amplifier span for LineAse, lightpath start for
    /// BoosterAse).
    span: usize,
    /// Pump variable indices; repeated entries square or cube the pump.
    pumps: [u32; 3],
    /// First span of each pump's lightpath, aligned with `pumps`.
    starts: [u32; 3],
}

#[derive(Debug, Clone)]
struct CompiledMargin {
    var: usize,
    first: usize,
    last: usize,
    ln_required: f64,
    addends: Vec<Addend>,
}

#[derive(Debug, Clone)]
struct SatTerm {
    var: usize,
    start: usize,
    lt_const: f64,
}

#[derive(Debug, Clone)]
struct SatConstraint {
    terms: Vec<SatTerm>,
    limit_w: f64,
}

/// Margin and saturation constraints of one system, compiled for repeated
/// evaluation. Variable order: log-powers follow `carriers()` (channel-major
/// over assigned slots), log-gains follow span order.
pub struct MarginSystem {
    carriers: Vec<Carrier>,
    slot_of: Vec<usize>,
    n_slots: usize,
    n_spans: usize,
    /// Prefix sums of per-span log transmittance, length n_spans + 1.
    lt: Vec<f64>,
    g_cap: Vec<f64>,
    g_transparent: Vec<f64>,
    per_carrier: Vec<CompiledMargin>,
    sats: Vec<SatConstraint>,
    ln_rx: f64,
    knobs: SolverKnobs,
}

/// Reusable evaluation scratch (gain prefix and per-addend exponents).
pub struct MarginWorkspace {
    gs: Vec<f64>,
    expo: Vec<f64>,
}

impl MarginSystem {
    pub fn build(cfg: &SystemConfig, xt: &XTensorSet) -> Result<Self, AllocError> {
        let n_spans = cfg.n_spans();
        if n_spans == 0 {
            return Err(AllocError::EmptyLink);
        }
        let carriers = cfg.carriers();
        if carriers.is_empty() {
            return Err(AllocError::NoCarriers);
        }
        let d = cfg.n_modes();
        let n_slots = cfg.plan.n_channels * d;

        let mut var_of_slot = vec![usize::MAX; n_slots];
        let mut slot_of = Vec::with_capacity(carriers.len());
        for (v, c) in carriers.iter().enumerate() {
            let slot = c.channel * d + c.mode;
            var_of_slot[slot] = v;
            slot_of.push(slot);
        }
        let mut start_of_slot = vec![usize::MAX; n_slots];
        for lp in &cfg.link.lightpaths {
            for &(ch, mode) in &lp.carriers {
                start_of_slot[ch * d + mode] = lp.first_span;
            }
        }

        let mut lt = Vec::with_capacity(n_spans + 1);
        lt.push(0.0);
        for s in 0..n_spans {
            lt.push(lt[s] + cfg.span_transmittance(s).ln());
        }
        let g_cap: Vec<f64> =
            (0..n_spans).map(|s| cfg.span_amplifier(s).max_gain.ln()).collect();
        let g_transparent: Vec<f64> =
            (0..n_spans).map(|s| cfg.transparent_gain(s).ln()).collect();
        let occupancy: Vec<Vec<bool>> =
            (0..n_spans).map(|s| cfg.span_occupancy(s)).collect();
        let hv_b = PLANCK * cfg.plan.center_frequency * cfg.plan.bandwidth;

        let mut per_carrier = Vec::with_capacity(carriers.len());
        for carrier in &carriers {
            let (first, last) = cfg.carrier_spans(carrier);
            let required = cfg.link.lightpaths[carrier.lightpath].required_snr;
            let mut addends = Vec::new();

            let booster = cfg.span_amplifier(first).noise_figure
                * (cfg.link.booster_gain - 1.0)
                * hv_b;
            if booster > 0.0 {
                addends.push(Addend {
                    log_c: booster.ln() + (lt[last + 1] - lt[first]),
                    sign: 1.0,
                    kind: AddendKind::BoosterAse,
                    span: first,
                    pumps: [0; 3],
                    starts: [0; 3],
                });
            }
            for s in first..=last {
                addends.push(Addend {
                    log_c: (cfg.span_amplifier(s).noise_figure * hv_b).ln()
                        + (lt[last + 1] - lt[s + 1]),
                    sign: 1.0,
                    kind: AddendKind::LineAse,
                    span: s,
                    pumps: [0; 3],
                    starts: [0; 3],
                });
            }

            // Interference terms merged by pump multiset per span class; the
            // exponent depends only on which slots pump, not on which moment
            // order produced the term.
            let mut merged_of_class: Vec<Option<Vec<([usize; 3], f64)>>> =
                vec![None; xt.classes().len()];
            for s in first..=last {
                let class = xt.class_of_span(s);
                let merged = merged_of_class[class].get_or_insert_with(|| {
                    let mut map: BTreeMap<[usize; 3], f64> = BTreeMap::new();
                    for t in nli_terms(cfg, xt, class, carrier.channel, carrier.mode) {
                        let mut key = t.pumps;
                        key.sort_unstable();
                        *map.entry(key).or_insert(0.0) += t.coefficient;
                    }
                    map.into_iter().filter(|(_, c)| *c != 0.0).collect()
                });
                let occ = &occupancy[s];
                for (pumps, c) in merged.iter() {
                    if pumps.iter().any(|&slot| !occ[slot]) {
                        continue;
                    }
                    let mut log_c = c.abs().ln() + (lt[last + 1] - lt[s]);
                    let mut pvars = [0u32; 3];
                    let mut pstarts = [0u32; 3];
                    for (i, &slot) in pumps.iter().enumerate() {
                        log_c += lt[s] - lt[start_of_slot[slot]];
                        pvars[i] = var_of_slot[slot] as u32;
                        pstarts[i] = start_of_slot[slot] as u32;
                    }
                    addends.push(Addend {
                        log_c,
                        sign: c.signum(),
                        kind: AddendKind::Interference,
                        span: s,
                        pumps: pvars,
                        starts: pstarts,
                    });
                }
            }

            per_carrier.push(CompiledMargin {
                var: var_of_slot[carrier.channel * d + carrier.mode],
                first,
                last,
                ln_required: required.ln(),
                addends,
            });
        }

        let sats = (0..n_spans)
            .map(|s| SatConstraint {
                terms: carriers
                    .iter()
                    .enumerate()
                    .filter_map(|(v, c)| {
                        let (a, b) = cfg.carrier_spans(c);
                        (a <= s && s <= b).then(|| SatTerm {
                            var: v,
                            start: a,
                            lt_const: lt[s] - lt[a],
                        })
                    })
                    .collect(),
                limit_w: cfg.span_amplifier(s).saturation_power,
            })
            .collect();

        Ok(Self {
            carriers,
            slot_of,
            n_slots,
            n_spans,
            lt,
            g_cap,
            g_transparent,
            per_carrier,
            sats,
            ln_rx: cfg.receiver_noise.ln(),
            knobs: cfg.solver.clone(),
        })
    }

    /// Solver knobs copied from the configuration.
    pub fn knobs(&self) -> &SolverKnobs {
        &self.knobs
    }

    pub fn n_carriers(&self) -> usize {
        self.carriers.len()
    }

    pub fn n_spans(&self) -> usize {
        self.n_spans
    }

    pub fn carriers(&self) -> &[Carrier] {
        &self.carriers
    }

    /// Log of the amplifier gain cap per span.
    pub fn gain_caps(&self) -> &[f64] {
        &self.g_cap
    }

    /// Loss-compensating log gains, capped at the amplifier limit.
    pub fn transparent_log_gains(&self) -> Vec<f64> {
        self.g_transparent.clone()
    }

    pub fn saturation_limit(&self, span: usize) -> f64 {
        self.sats[span].limit_w
    }

    /// Expands per-carrier log powers into the per-slot watt vector the
    /// interference engine expects (unassigned slots zero).
    pub fn slot_powers(&self, p_hat: &[f64]) -> Vec<f64> {
        let mut powers = vec![0.0; self.n_slots];
        for (v, &slot) in self.slot_of.iter().enumerate() {
            powers[slot] = p_hat[v].exp();
        }
        powers
    }

    pub fn workspace(&self) -> MarginWorkspace {
        let cap = self.per_carrier.iter().map(|c| c.addends.len()).max().unwrap_or(0);
        MarginWorkspace { gs: vec![0.0; self.n_spans + 1], expo: Vec::with_capacity(cap) }
    }

    fn gain_prefix(&self, g: &[f64], ws: &mut MarginWorkspace) {
        ws.gs[0] = 0.0;
        for s in 0..self.n_spans {
            ws.gs[s + 1] = ws.gs[s] + g[s];
        }
    }

    fn exponent(&self, cm: &CompiledMargin, ad: &Addend, p_hat: &[f64], g: &[f64], gs: &[f64]) -> f64 {
        match ad.kind {
            AddendKind::Interference => {
                let mut e = ad.log_c + (gs[cm.last + 1] - gs[ad.span]);
                for i in 0..3 {
                    e += p_hat[ad.pumps[i] as usize]
                        + (gs[ad.span] - gs[ad.starts[i] as usize]);
                }
                e
            }
            AddendKind::BoosterAse => ad.log_c + (gs[cm.last + 1] - gs[cm.first]),
            AddendKind::LineAse => {
                ad.log_c + (gs[cm.last + 1] - gs[ad.span + 1]) + g[ad.span].exp_m1().ln()
            }
        }
    }

    /// Constraint value of carrier `l` in nats: zero at exactly the required
    /// SNR, negative with margin to spare. Returns +inf if the noise sum
    /// degenerates (rejected by line searches).
    pub fn margin(&self, l: usize, p_hat: &[f64], g: &[f64], ws: &mut MarginWorkspace) -> f64 {
        self.gain_prefix(g, ws);
        self.margin_prefixed(l, p_hat, g, ws)
    }

    /// All margins at once, reusing one gain prefix.
    pub fn margins_into(&self, p_hat: &[f64], g: &[f64], ws: &mut MarginWorkspace, out: &mut [f64]) {
        self.gain_prefix(g, ws);
        for l in 0..self.per_carrier.len() {
            out[l] = self.margin_prefixed(l, p_hat, g, ws);
        }
    }

    fn margin_prefixed(&self, l: usize, p_hat: &[f64], g: &[f64], ws: &mut MarginWorkspace) -> f64 {
        let cm = &self.per_carrier[l];
        ws.expo.clear();
        let mut shift = self.ln_rx;
        for ad in &cm.addends {
            let e = self.exponent(cm, ad, p_hat, g, &ws.gs);
            if e > shift {
                shift = e;
            }
            ws.expo.push(e);
        }
        let mut total = (self.ln_rx - shift).exp();
        for (ad, &e) in cm.addends.iter().zip(&ws.expo) {
            total += ad.sign * (e - shift).exp();
        }
        if !(total > 0.0) {
            return f64::INFINITY;
        }
        let ln_noise = shift + total.ln();
        cm.ln_required + ln_noise
            - p_hat[cm.var]
            - (ws.gs[cm.last + 1] - ws.gs[cm.first])
            - (self.lt[cm.last + 1] - self.lt[cm.first])
    }

    /// Margin of carrier `l` plus `weight` times its gradient accumulated
    /// into `grad_p` (per carrier) and `diff_g` (difference array of length
    /// n_spans + 1; run [`finish_gain_grad`] once all contributions are in).
    pub fn margin_with_grad(
        &self,
        l: usize,
        p_hat: &[f64],
        g: &[f64],
        ws: &mut MarginWorkspace,
        weight: f64,
        grad_p: &mut [f64],
        diff_g: &mut [f64],
    ) -> f64 {
        self.gain_prefix(g, ws);
        let cm = &self.per_carrier[l];
        ws.expo.clear();
        let mut shift = self.ln_rx;
        for ad in &cm.addends {
            let e = self.exponent(cm, ad, p_hat, g, &ws.gs);
            if e > shift {
                shift = e;
            }
            ws.expo.push(e);
        }
        let mut total = (self.ln_rx - shift).exp();
        for (ad, &e) in cm.addends.iter().zip(&ws.expo) {
            total += ad.sign * (e - shift).exp();
        }
        if !(total > 0.0) {
            return f64::INFINITY;
        }
        let inv = 1.0 / total;
        for (ad, &e) in cm.addends.iter().zip(&ws.expo) {
            let share = weight * ad.sign * (e - shift).exp() * inv;
            match ad.kind {
                AddendKind::Interference => {
                    for i in 0..3 {
                        grad_p[ad.pumps[i] as usize] += share;
                        // Pump propagates over [start, span).
                        diff_g[ad.starts[i] as usize] += share;
                        diff_g[ad.span] -= share;
                    }
                    diff_g[ad.span] += share;
                    diff_g[cm.last + 1] -= share;
                }
                AddendKind::BoosterAse => {
                    diff_g[cm.first] += share;
                    diff_g[cm.last + 1] -= share;
                }
                AddendKind::LineAse => {
                    diff_g[ad.span + 1] += share;
                    diff_g[cm.last + 1] -= share;
                    // d/dg of e^g - 1 is e^g; computed from the affine part
                    // so the derivative survives g = 0 where the value is 0.
                    let affine = ad.log_c + (ws.gs[cm.last + 1] - ws.gs[ad.span + 1]);
                    let point = weight * inv * (affine - shift).exp() * g[ad.span].exp();
                    diff_g[ad.span] += point;
                    diff_g[ad.span + 1] -= point;
                }
            }
        }
        grad_p[cm.var] -= weight;
        diff_g[cm.first] -= weight;
        diff_g[cm.last + 1] += weight;
        let ln_noise = shift + total.ln();
        cm.ln_required + ln_noise
            - p_hat[cm.var]
            - (ws.gs[cm.last + 1] - ws.gs[cm.first])
            - (self.lt[cm.last + 1] - self.lt[cm.first])
    }

    /// Total carrier power in watts entering span `s`.
    pub fn saturation(&self, s: usize, p_hat: &[f64], g: &[f64], ws: &mut MarginWorkspace) -> f64 {
        self.gain_prefix(g, ws);
        self.sats[s]
            .terms
            .iter()
            .map(|t| (p_hat[t.var] + (ws.gs[s] - ws.gs[t.start]) + t.lt_const).exp())
            .sum()
    }

    /// Saturation value plus `weight` times its gradient (watt units).
    pub fn saturation_with_grad(
        &self,
        s: usize,
        p_hat: &[f64],
        g: &[f64],
        ws: &mut MarginWorkspace,
        weight: f64,
        grad_p: &mut [f64],
        diff_g: &mut [f64],
    ) -> f64 {
        self.gain_prefix(g, ws);
        let mut total = 0.0;
        for t in &self.sats[s].terms {
            let v = (p_hat[t.var] + (ws.gs[s] - ws.gs[t.start]) + t.lt_const).exp();
            total += v;
            grad_p[t.var] += weight * v;
            diff_g[t.start] += weight * v;
            diff_g[s] -= weight * v;
        }
        total
    }
}

/// Collapses a gain-derivative difference array in place; afterwards
/// `diff_g[s]` holds the derivative with respect to the span-s log gain.
pub fn finish_gain_grad(diff_g: &mut [f64]) {
    let mut running = 0.0;
    for v in diff_g.iter_mut() {
        running += *v;
        *v = running;
    }
}

/// Log-domain constraint value for one carrier; the planner requires this
/// to stay at or below the margin bound. Errors on a non-finite result.
pub fn margin_constraint_value(
    sys: &MarginSystem,
    l: usize,
    p_hat: &[f64],
    g: &[f64],
) -> Result<f64, AllocError> {
    if l >= sys.n_carriers() {
        return Err(AllocError::CarrierIndex(l));
    }
    let mut ws = sys.workspace();
    let m = sys.margin(l, p_hat, g, &mut ws);
    if !m.is_finite() {
        return Err(AllocError::NonFinite(format!("margin of carrier {l}")));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fiberplan_core::config::parse_config;
    use fiberplan_egn::variance::{snr_report, transparent_gains};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn config(n_channels: usize, spans: usize, preset: &str) -> SystemConfig {
        let text = format!(
            r#"
[plan]
n_channels = {n_channels}
symbol_rate = {{ value = 32.0, unit = "GBd" }}
bandwidth = {{ value = 32.0, unit = "GHz" }}
spacing = {{ value = 50.0, unit = "GHz" }}
center_wavelength = {{ value = 1550.0, unit = "nm" }}

[constellation]
preset = "{preset}"

[receiver]
noise_power = {{ value = -28.0, unit = "dBm" }}

[[fiber]]
name = "smf"
gamma = {{ value = 1.3, unit = "1/W/km" }}
coupling = [[1.0]]

[[fiber.mode]]
name = "LP01"
attenuation = {{ value = 0.226, unit = "dB/km" }}
beta2 = {{ value = 31.86, unit = "ps^2/km" }}
beta3 = {{ value = 0.1452, unit = "ps^3/km" }}

[[amplifier]]
name = "edfa"
noise_figure = {{ value = 6.0, unit = "dB" }}
max_gain = {{ value = 30.0, unit = "dB" }}
saturation_power = {{ value = 25.0, unit = "dBm" }}

[link]
booster_gain = {{ value = 20.0, unit = "dB" }}

[[link.span]]
length = {{ value = 80.0, unit = "km" }}
fiber = "smf"
amplifier = "edfa"
count = {spans}

[[lightpath]]
id = "L1"
first_span = 1
last_span = {spans}
channels = [{channels}]
modes = ["LP01"]
required_snr = {{ value = 5.5, unit = "dB" }}
"#,
            channels =
                (1..=n_channels).map(|c| c.to_string()).collect::<Vec<_>>().join(", "),
        );
        parse_config(&text).unwrap()
    }

    fn build(cfg: &SystemConfig) -> (MarginSystem, XTensorSet) {
        let xt = XTensorSet::build_with_points(cfg, 8).unwrap();
        let sys = MarginSystem::build(cfg, &xt).unwrap();
        (sys, xt)
    }

    #[test]
    fn margins_match_the_receiver_report() {
        for (n_ch, spans) in [(1usize, 1usize), (2, 1), (2, 3)] {
            let cfg = config(n_ch, spans, "qpsk");
            let (sys, xt) = build(&cfg);
            let mut ws = sys.workspace();
            let p_hat: Vec<f64> =
                (0..n_ch).map(|i| (1.5e-3f64 * (i + 1) as f64).ln()).collect();
            let g = sys.transparent_log_gains();
            let powers = sys.slot_powers(&p_hat);
            let gains: Vec<f64> = g.iter().map(|x| x.exp()).collect();
            let report = snr_report(&cfg, &xt, &powers, &gains);
            for (l, rep) in report.iter().enumerate() {
                let m = sys.margin(l, &p_hat, &g, &mut ws);
                let required = cfg.link.lightpaths[rep.carrier.lightpath].required_snr;
                let snr_from_margin = (-m).exp() * required;
                assert!(
                    (snr_from_margin - rep.snr).abs() <= 1e-10 * rep.snr,
                    "carrier {l}: {snr_from_margin} vs {rep:?}"
                );
            }
        }
    }

    #[test]
    fn own_power_enters_linearly_when_interference_is_negligible() {
        // At sub-nanowatt launch the noise is all ASE plus receiver noise,
        // so the constraint moves one-for-one against the own log power.
        let cfg = config(2, 2, "qpsk");
        let (sys, _xt) = build(&cfg);
        let mut ws = sys.workspace();
        let g = sys.transparent_log_gains();
        let p0 = vec![(1e-9f64).ln(); 2];
        let delta = 0.37;
        let mut p1 = p0.clone();
        p1[0] += delta;
        let before = sys.margin(0, &p0, &g, &mut ws);
        let after = sys.margin(0, &p1, &g, &mut ws);
        assert!((after - (before - delta)).abs() < 1e-9, "{before} -> {after}");
    }

    #[test]
    fn log_power_convexity_holds_to_machine_precision() {
        // Gaussian statistics keep every interference coefficient positive,
        // so in the power coordinates the constraint is exactly a shifted
        // log-sum-exp and midpoint convexity must hold to rounding.
        let cfg = config(3, 2, "gaussian");
        let (sys, _xt) = build(&cfg);
        let mut ws = sys.workspace();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g_t = sys.transparent_log_gains();
        let caps = sys.gain_caps().to_vec();
        let mut checked = 0usize;
        while checked < 1200 {
            let g: Vec<f64> = g_t
                .iter()
                .zip(&caps)
                .map(|(&t, &c)| (t + rng.gen_range(-0.5..0.5)).clamp(0.0, c))
                .collect();
            let x: Vec<f64> =
                (0..3).map(|_| rng.gen_range((1e-5f64).ln()..(1e-2f64).ln())).collect();
            let y: Vec<f64> =
                (0..3).map(|_| rng.gen_range((1e-5f64).ln()..(1e-2f64).ln())).collect();
            let t: f64 = rng.gen_range(0.05..0.95);
            let mid: Vec<f64> =
                x.iter().zip(&y).map(|(&a, &b)| t * a + (1.0 - t) * b).collect();
            for l in 0..sys.n_carriers() {
                let vx = sys.margin(l, &x, &g, &mut ws);
                let vy = sys.margin(l, &y, &g, &mut ws);
                let vm = sys.margin(l, &mid, &g, &mut ws);
                assert!(
                    vm <= t * vx + (1.0 - t) * vy + 1e-9,
                    "violation {:.3e}",
                    vm - (t * vx + (1.0 - t) * vy)
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn joint_convexity_holds_up_to_the_spontaneous_term() {
        // Varying gains exposes the one non-affine exponent, ln(e^g - 1) of
        // each line amplifier, which is concave with curvature about e^-g.
        // Within +-0.5 nat of transparent gain that bounds the midpoint
        // violation near 1e-3 nats; everything else is exact log-sum-exp.
        let cfg = config(3, 2, "gaussian");
        let (sys, _xt) = build(&cfg);
        let mut ws = sys.workspace();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g_t = sys.transparent_log_gains();
        let caps = sys.gain_caps().to_vec();
        let sample_g = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            g_t.iter()
                .zip(&caps)
                .map(|(&t, &c)| (t + rng.gen_range(-0.5..0.5)).clamp(0.0, c))
                .collect()
        };
        let sample_p = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..3).map(|_| rng.gen_range((1e-5f64).ln()..(1e-2f64).ln())).collect()
        };
        for _ in 0..400 {
            let (px, gx) = (sample_p(&mut rng), sample_g(&mut rng));
            let (py, gy) = (sample_p(&mut rng), sample_g(&mut rng));
            let t: f64 = rng.gen_range(0.05..0.95);
            let pm: Vec<f64> =
                px.iter().zip(&py).map(|(&a, &b)| t * a + (1.0 - t) * b).collect();
            let gm: Vec<f64> =
                gx.iter().zip(&gy).map(|(&a, &b)| t * a + (1.0 - t) * b).collect();
            for l in 0..sys.n_carriers() {
                let vx = sys.margin(l, &px, &gx, &mut ws);
                let vy = sys.margin(l, &py, &gy, &mut ws);
                let vm = sys.margin(l, &pm, &gm, &mut ws);
                assert!(
                    vm <= t * vx + (1.0 - t) * vy + 2e-3,
                    "violation {:.3e}",
                    vm - (t * vx + (1.0 - t) * vy)
                );
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let cfg = config(2, 3, "qpsk");
        let (sys, _xt) = build(&cfg);
        let mut ws = sys.workspace();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p: Vec<f64> =
                (0..2).map(|_| rng.gen_range((1e-5f64).ln()..(1e-2f64).ln())).collect();
            let g: Vec<f64> = (0..3).map(|_| rng.gen_range(3.0..4.5)).collect();
            for l in 0..sys.n_carriers() {
                let mut grad_p = vec![0.0; sys.n_carriers()];
                let mut diff_g = vec![0.0; sys.n_spans() + 1];
                sys.margin_with_grad(l, &p, &g, &mut ws, 1.0, &mut grad_p, &mut diff_g);
                finish_gain_grad(&mut diff_g);
                let h = 1e-6;
                for j in 0..2 {
                    let mut pp = p.clone();
                    pp[j] += h;
                    let up = sys.margin(l, &pp, &g, &mut ws);
                    pp[j] -= 2.0 * h;
                    let dn = sys.margin(l, &pp, &g, &mut ws);
                    let fd = (up - dn) / (2.0 * h);
                    assert!(
                        (grad_p[j] - fd).abs() <= 1e-6 * fd.abs().max(1.0),
                        "p[{j}]: {} vs {fd}",
                        grad_p[j]
                    );
                }
                for s in 0..3 {
                    let mut gg = g.clone();
                    gg[s] += h;
                    let up = sys.margin(l, &p, &gg, &mut ws);
                    gg[s] -= 2.0 * h;
                    let dn = sys.margin(l, &p, &gg, &mut ws);
                    let fd = (up - dn) / (2.0 * h);
                    assert!(
                        (diff_g[s] - fd).abs() <= 1e-6 * fd.abs().max(1.0),
                        "g[{s}]: {} vs {fd}",
                        diff_g[s]
                    );
                }
            }
        }
    }

    #[test]
    fn saturation_sums_carrier_powers_at_each_span_input() {
        let cfg = config(2, 2, "qpsk");
        let (sys, _xt) = build(&cfg);
        let mut ws = sys.workspace();
        let p_hat = vec![(1e-3f64).ln(), (2e-3f64).ln()];
        // Transparent gains: the same total power enters every span.
        let g = sys.transparent_log_gains();
        let at0 = sys.saturation(0, &p_hat, &g, &mut ws);
        let at1 = sys.saturation(1, &p_hat, &g, &mut ws);
        assert!((at0 - 3e-3).abs() < 1e-15);
        assert!((at1 - 3e-3).abs() < 1e-12);
        // One nat more gain on span 0 multiplies the span-1 input by e.
        let mut g_up = g.clone();
        g_up[0] += 1.0;
        let boosted = sys.saturation(1, &p_hat, &g_up, &mut ws);
        assert!((boosted / at1 - 1.0f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn saturation_gradient_matches_central_differences() {
        let cfg = config(2, 2, "qpsk");
        let (sys, _xt) = build(&cfg);
        let mut ws = sys.workspace();
        let p = vec![(1e-3f64).ln(), (5e-4f64).ln()];
        let g = vec![3.9, 4.2];
        let mut grad_p = vec![0.0; 2];
        let mut diff_g = vec![0.0; 3];
        sys.saturation_with_grad(1, &p, &g, &mut ws, 1.0, &mut grad_p, &mut diff_g);
        finish_gain_grad(&mut diff_g);
        let h = 1e-6;
        for j in 0..2 {
            let mut pp = p.clone();
            pp[j] += h;
            let up = sys.saturation(1, &pp, &g, &mut ws);
            pp[j] -= 2.0 * h;
            let dn = sys.saturation(1, &pp, &g, &mut ws);
            let fd = (up - dn) / (2.0 * h);
            assert!((grad_p[j] - fd).abs() <= 1e-8 * fd.abs().max(1e-12));
        }
        let mut gg = g.clone();
        gg[0] += h;
        let up = sys.saturation(1, &p, &gg, &mut ws);
        gg[0] -= 2.0 * h;
        let dn = sys.saturation(1, &p, &gg, &mut ws);
        let fd = (up - dn) / (2.0 * h);
        assert!((diff_g[0] - fd).abs() <= 1e-8 * fd.abs().max(1e-12));
        // Span-1 gain sits after the span-1 input: no effect there.
        assert_eq!(diff_g[1], 0.0);
    }

    #[test]
    fn out_of_range_carrier_is_rejected() {
        let cfg = config(1, 1, "qpsk");
        let (sys, _xt) = build(&cfg);
        let g = sys.transparent_log_gains();
        let err = margin_constraint_value(&sys, 5, &[(1e-3f64).ln()], &g);
        assert!(matches!(err, Err(AllocError::CarrierIndex(5))));
    }
}
