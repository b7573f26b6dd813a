//! Feasibility solves by Lagrangian duality.
//!
//! Given a candidate margin bound beta, the solver asks whether some choice
//! of log powers and log gains keeps every carrier's constraint at or below
//! beta while respecting saturation and the gain caps. The Lagrangian
//! weights constraint residuals by multipliers; an inner projected gradient
//! descent with Armijo backtracking minimizes it over the primal variables,
//! and an outer projected subgradient ascent with 1/sqrt(t) step decay
//! drives the multipliers. Gain caps are enforced by projection onto
//! [0, ln G_max], so their multipliers never activate.
//!
//! The infeasibility certificate is weak duality: any multiplier point whose
//! inner minimum is positive proves the feasible set empty. Hitting the
//! outer iteration cap without a certificate is reported distinctly.

use crate::margin::{finish_gain_grad, MarginSystem, MarginWorkspace};
use crate::AllocError;

/// Wide numerical guard rails on log power (0.004 nW to 20 W); real optima
/// sit far inside.
const P_HAT_MIN: f64 = -40.0;
const P_HAT_MAX: f64 = 3.0;

/// Accepting an infeasibility certificate needs the inner minimum, not just
/// a small gradient. A gradient norm below `grad_tol` bounds the remaining
/// descent by norm times the box diameter, well under this threshold for
/// the system sizes at hand.
const CERTIFICATE_TOL: f64 = 1e-4;

/// Relative slack granted on the saturation limits.
const SAT_SLACK: f64 = 1e-9;

/// Smallest weight a margin multiplier may carry inside the solve. Any
/// strictly positive weight keeps the corresponding carrier's power at an
/// interior stationary point of the weighted objective.
const LAMBDA_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Outer multiplier updates before giving up.
    pub outer_cap: usize,
    /// Initial dual ascent step, decayed as 1/sqrt(t).
    pub step0: f64,
    /// Constraint slack accepted as feasible, nats.
    pub feasibility_tol: f64,
    /// Inner loop stops below this projected-gradient norm.
    pub grad_tol: f64,
    /// Inner descent iteration cap per outer round.
    pub inner_cap: usize,
    /// Optimize gains (true) or hold them at their warm-start values.
    pub optimize_gains: bool,
    /// Fix the final span's gain at its cap (always margin-improving since
    /// nothing propagates after it).
    pub pin_last_gain: bool,
    /// Drop saturation from the constraint set.
    pub relax_saturation: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            outer_cap: 5000,
            step0: 0.05,
            feasibility_tol: 1e-6,
            grad_tol: 1e-7,
            inner_cap: 200,
            optimize_gains: false,
            pin_last_gain: false,
            relax_saturation: false,
        }
    }
}

impl SolveOptions {
    /// Options seeded from the system's solver knobs.
    pub fn for_system(sys: &MarginSystem, optimize_gains: bool, pin_last_gain: bool) -> Self {
        let k = sys.knobs();
        Self {
            outer_cap: k.max_outer_iterations,
            step0: k.dual_step,
            optimize_gains,
            pin_last_gain,
            relax_saturation: k.relax_saturation,
            ..Self::default()
        }
    }
}

/// Multipliers of the dual ascent. `nu` (gain-cap multipliers) is retained
/// for completeness but stays zero: the caps are handled by projection.
#[derive(Debug, Clone)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl DualState {
    pub fn fresh(n_carriers: usize, n_spans: usize) -> Self {
        Self {
            lambda: vec![1.0; n_carriers],
            mu: vec![0.0; n_spans],
            nu: vec![0.0; n_spans],
        }
    }
}

/// One primal iterate: per-carrier log powers and per-span log gains.
#[derive(Debug, Clone)]
pub struct PrimalPoint {
    pub p_hat: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible { point: PrimalPoint, outer_iterations: usize },
    Infeasible { certified: bool, outer_iterations: usize },
}

struct Buffers {
    ws: MarginWorkspace,
    grad_p: Vec<f64>,
    grad_g: Vec<f64>,
    margins: Vec<f64>,
    margins_avg: Vec<f64>,
    sats: Vec<f64>,
}

impl Buffers {
    fn new(sys: &MarginSystem) -> Self {
        Self {
            ws: sys.workspace(),
            grad_p: vec![0.0; sys.n_carriers()],
            grad_g: vec![0.0; sys.n_spans() + 1],
            margins: vec![0.0; sys.n_carriers()],
            margins_avg: vec![0.0; sys.n_carriers()],
            sats: vec![0.0; sys.n_spans()],
        }
    }
}

fn project(sys: &MarginSystem, x: &mut PrimalPoint, opts: &SolveOptions) {
    for p in x.p_hat.iter_mut() {
        *p = p.clamp(P_HAT_MIN, P_HAT_MAX);
    }
    if opts.optimize_gains {
        let caps = sys.gain_caps();
        for (s, g) in x.g.iter_mut().enumerate() {
            *g = g.clamp(0.0, caps[s]);
        }
        if opts.pin_last_gain {
            x.g[sys.n_spans() - 1] = caps[sys.n_spans() - 1];
        }
    }
}

/// Lagrangian value at `x`; gradient accumulated into the buffers when
/// `want_grad`. Returns +inf on degenerate noise sums (line search rejects).
fn lagrangian(
    sys: &MarginSystem,
    x: &PrimalPoint,
    dual: &DualState,
    beta: f64,
    opts: &SolveOptions,
    bufs: &mut Buffers,
    want_grad: bool,
) -> f64 {
    if want_grad {
        bufs.grad_p.fill(0.0);
        bufs.grad_g.fill(0.0);
    }
    let mut f = 0.0;
    for (l, &lam) in dual.lambda.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let m = if want_grad {
            sys.margin_with_grad(
                l, &x.p_hat, &x.g, &mut bufs.ws, lam, &mut bufs.grad_p, &mut bufs.grad_g,
            )
        } else {
            sys.margin(l, &x.p_hat, &x.g, &mut bufs.ws)
        };
        if !m.is_finite() {
            return f64::INFINITY;
        }
        f += lam * (m - beta);
    }
    if !opts.relax_saturation {
        // The saturation constraint enters as sat/limit - 1 <= 0 so its
        // multiplier shares the dimensionless scale of the margin ones.
        for (s, &mu) in dual.mu.iter().enumerate() {
            if mu <= 0.0 {
                continue;
            }
            let limit = sys.saturation_limit(s);
            let sat = if want_grad {
                sys.saturation_with_grad(
                    s,
                    &x.p_hat,
                    &x.g,
                    &mut bufs.ws,
                    mu / limit,
                    &mut bufs.grad_p,
                    &mut bufs.grad_g,
                )
            } else {
                sys.saturation(s, &x.p_hat, &x.g, &mut bufs.ws)
            };
            f += mu * (sat / limit - 1.0);
        }
    }
    if want_grad {
        finish_gain_grad(&mut bufs.grad_g);
    }
    f
}

/// Projected gradient descent with Armijo backtracking. Returns the final
/// objective and whether the projected-gradient norm dropped below tol.
fn inner_minimize(
    sys: &MarginSystem,
    x: &mut PrimalPoint,
    dual: &DualState,
    beta: f64,
    opts: &SolveOptions,
    bufs: &mut Buffers,
) -> Result<bool, AllocError> {
    const ARMIJO_C: f64 = 1e-4;
    let n_p = x.p_hat.len();
    let n_g = if opts.optimize_gains { x.g.len() } else { 0 };
    let caps = sys.gain_caps();
    let last = sys.n_spans() - 1;
    let g_fixed = |s: usize| opts.pin_last_gain && s == last;

    let mut f = lagrangian(sys, x, dual, beta, opts, bufs, true);
    if !f.is_finite() {
        return Err(AllocError::NonFinite("inner objective at the starting point".into()));
    }
    let mut trial = x.clone();
    let mut step = 1.0f64;
    for _ in 0..opts.inner_cap {
        // Projected-gradient stationarity at unit step.
        let mut pg_sq = 0.0;
        for i in 0..n_p {
            let moved = (x.p_hat[i] - bufs.grad_p[i]).clamp(P_HAT_MIN, P_HAT_MAX);
            pg_sq += (x.p_hat[i] - moved) * (x.p_hat[i] - moved);
        }
        for s in 0..n_g {
            if g_fixed(s) {
                continue;
            }
            let moved = (x.g[s] - bufs.grad_g[s]).clamp(0.0, caps[s]);
            pg_sq += (x.g[s] - moved) * (x.g[s] - moved);
        }
        if pg_sq.sqrt() <= opts.grad_tol {
            return Ok(true);
        }

        let mut t = (step * 2.0).min(1e3);
        let mut accepted = false;
        while t >= 1e-18 {
            let mut descent = 0.0;
            for i in 0..n_p {
                let moved = (x.p_hat[i] - t * bufs.grad_p[i]).clamp(P_HAT_MIN, P_HAT_MAX);
                descent += bufs.grad_p[i] * (moved - x.p_hat[i]);
                trial.p_hat[i] = moved;
            }
            trial.g.copy_from_slice(&x.g);
            for s in 0..n_g {
                if g_fixed(s) {
                    continue;
                }
                let moved = (x.g[s] - t * bufs.grad_g[s]).clamp(0.0, caps[s]);
                descent += bufs.grad_g[s] * (moved - x.g[s]);
                trial.g[s] = moved;
            }
            let f_trial = lagrangian(sys, &trial, dual, beta, opts, bufs, false);
            if f_trial <= f + ARMIJO_C * descent {
                std::mem::swap(&mut x.p_hat, &mut trial.p_hat);
                std::mem::swap(&mut x.g, &mut trial.g);
                step = t;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No progress at any step length: numerically stationary.
            return Ok(true);
        }
        f = lagrangian(sys, x, dual, beta, opts, bufs, true);
        if !f.is_finite() {
            return Err(AllocError::NonFinite("inner objective after a step".into()));
        }
    }
    Ok(false)
}

/// Decides whether margin bound `beta` admits an allocation. The dual state
/// carries over between calls so bisection steps warm-start each other.
pub fn dual_feasibility_solve(
    sys: &MarginSystem,
    beta: f64,
    x0: &PrimalPoint,
    dual: &mut DualState,
    opts: &SolveOptions,
) -> Result<Feasibility, AllocError> {
    if !beta.is_finite() {
        return Err(AllocError::NonFinite("margin bound".into()));
    }
    let mut bufs = Buffers::new(sys);
    let mut x = x0.clone();
    project(sys, &mut x, opts);

    // The dual objective is positively homogeneous in (lambda, mu): only
    // the direction carries information between warm-started calls, so
    // rescale to unit mean to keep the fixed ascent step proportionate.
    // The floor keeps every carrier weakly priced; at exactly zero weight
    // the inner minimizer discards a carrier outright, and the resulting
    // collapse-revive limit cycle stalls the ascent near the optimum.
    let total: f64 = dual.lambda.iter().sum();
    if total > 0.0 {
        let c = dual.lambda.len() as f64 / total;
        for v in dual.lambda.iter_mut() {
            *v = (*v * c).max(LAMBDA_FLOOR);
        }
        for v in dual.mu.iter_mut() {
            *v *= c;
        }
    } else {
        dual.lambda.fill(1.0);
    }

    let mut avg = x.clone();
    let mut avg_n: u64 = 0;

    for t in 1..=opts.outer_cap {
        let inner_converged = inner_minimize(sys, &mut x, dual, beta, opts, &mut bufs)?;

        sys.margins_into(&x.p_hat, &x.g, &mut bufs.ws, &mut bufs.margins);
        let worst_margin =
            bufs.margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut worst_sat = f64::NEG_INFINITY;
        for s in 0..sys.n_spans() {
            bufs.sats[s] = sys.saturation(s, &x.p_hat, &x.g, &mut bufs.ws);
            let rel = (bufs.sats[s] - sys.saturation_limit(s)) / sys.saturation_limit(s);
            worst_sat = worst_sat.max(rel);
        }
        let sat_ok = opts.relax_saturation || worst_sat <= SAT_SLACK;
        if worst_margin <= beta + opts.feasibility_tol && sat_ok {
            return Ok(Feasibility::Feasible { point: x, outer_iterations: t });
        }

        // Weak duality: a positive inner minimum certifies emptiness.
        let mut q = 0.0;
        for (l, &lam) in dual.lambda.iter().enumerate() {
            q += lam * (bufs.margins[l] - beta);
        }
        if !opts.relax_saturation {
            for (s, &mu) in dual.mu.iter().enumerate() {
                q += mu * (bufs.sats[s] / sys.saturation_limit(s) - 1.0);
            }
        }
        if inner_converged && q > CERTIFICATE_TOL {
            return Ok(Feasibility::Infeasible { certified: true, outer_iterations: t });
        }

        // Ergodic iterate: the raw minimizers can cycle around the saddle
        // while their running average approaches the primal optimum, so
        // feasibility is also tested on the average. Restarting at powers
        // of two keeps early, far-off iterates from dominating it. This is
        // a direct constraint check, sound regardless of the dual state.
        if avg_n == 0 || t.is_power_of_two() {
            avg.p_hat.copy_from_slice(&x.p_hat);
            avg.g.copy_from_slice(&x.g);
            avg_n = 1;
        } else {
            avg_n += 1;
            let w = 1.0 / avg_n as f64;
            for (a, &v) in avg.p_hat.iter_mut().zip(x.p_hat.iter()) {
                *a += w * (v - *a);
            }
            for (a, &v) in avg.g.iter_mut().zip(x.g.iter()) {
                *a += w * (v - *a);
            }
            sys.margins_into(&avg.p_hat, &avg.g, &mut bufs.ws, &mut bufs.margins_avg);
            let worst_avg =
                bufs.margins_avg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if worst_avg <= beta + opts.feasibility_tol {
                let ok = opts.relax_saturation
                    || (0..sys.n_spans()).all(|s| {
                        let sat = sys.saturation(s, &avg.p_hat, &avg.g, &mut bufs.ws);
                        (sat - sys.saturation_limit(s)) / sys.saturation_limit(s)
                            <= SAT_SLACK
                    });
                if ok {
                    return Ok(Feasibility::Feasible { point: avg, outer_iterations: t });
                }
            }
        }

        // Normalized subgradient step: 0.05/sqrt(t) of movement along the
        // residual direction. Raw residuals here are a few millinats, which
        // would reshape the multipliers far too slowly within the iteration
        // budget. Saturation residuals enter relative to the limit so the
        // direction is not unit-mixed, and constraints that are both slack
        // and priced at zero cannot move, so they do not scale the step.
        let mut norm_sq = 0.0;
        for (l, m) in bufs.margins.iter().enumerate() {
            let r = m - beta;
            if dual.lambda[l] > 0.0 || r > 0.0 {
                norm_sq += r * r;
            }
        }
        if !opts.relax_saturation {
            for s in 0..sys.n_spans() {
                let r = bufs.sats[s] / sys.saturation_limit(s) - 1.0;
                if dual.mu[s] > 0.0 || r > 0.0 {
                    norm_sq += r * r;
                }
            }
        }
        let rate = opts.step0 / ((t as f64).sqrt() * norm_sq.sqrt().max(1e-12));
        for (l, lam) in dual.lambda.iter_mut().enumerate() {
            *lam = (*lam + rate * (bufs.margins[l] - beta)).max(LAMBDA_FLOOR);
        }
        if !opts.relax_saturation {
            for (s, mu) in dual.mu.iter_mut().enumerate() {
                let r = bufs.sats[s] / sys.saturation_limit(s) - 1.0;
                *mu = (*mu + rate * r).max(0.0);
            }
        }
    }
    Ok(Feasibility::Infeasible { certified: false, outer_iterations: opts.outer_cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fiberplan_core::config::parse_config;
    use fiberplan_core::SystemConfig;
    use fiberplan_egn::XTensorSet;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn config(n_channels: usize, spans: usize) -> SystemConfig {
        let text = format!(
            r#"
[plan]
n_channels = {n_channels}
symbol_rate = {{ value = 32.0, unit = "GBd" }}
bandwidth = {{ value = 32.0, unit = "GHz" }}
spacing = {{ value = 50.0, unit = "GHz" }}
center_wavelength = {{ value = 1550.0, unit = "nm" }}

[constellation]
preset = "qpsk"

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

    fn build(cfg: &SystemConfig) -> MarginSystem {
        let xt = XTensorSet::build_with_points(cfg, 8).unwrap();
        MarginSystem::build(cfg, &xt).unwrap()
    }

    fn start(sys: &MarginSystem) -> PrimalPoint {
        PrimalPoint {
            p_hat: vec![(1e-3f64).ln(); sys.n_carriers()],
            g: sys.transparent_log_gains(),
        }
    }

    #[test]
    fn huge_bound_is_immediately_feasible() {
        let cfg = config(2, 2);
        let sys = build(&cfg);
        let x0 = start(&sys);
        let mut dual = DualState::fresh(sys.n_carriers(), sys.n_spans());
        let opts = SolveOptions::for_system(&sys, false, false);
        let out = dual_feasibility_solve(&sys, 100.0, &x0, &mut dual, &opts).unwrap();
        match out {
            Feasibility::Feasible { outer_iterations, .. } => {
                assert!(outer_iterations <= 3, "took {outer_iterations} rounds")
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn bound_below_the_optimum_is_certified_infeasible() {
        // Scalar oracle: grid the single carrier's log power for the best
        // attainable constraint value, then ask for 3 nats better.
        let cfg = config(1, 2);
        let sys = build(&cfg);
        let mut ws = sys.workspace();
        let g = sys.transparent_log_gains();
        let best = (0..4000)
            .map(|i| {
                let p = (1e-6f64).ln() + i as f64 * ((1e-1f64).ln() - (1e-6f64).ln()) / 3999.0;
                sys.margin(0, &[p], &g, &mut ws)
            })
            .fold(f64::INFINITY, f64::min);
        let x0 = start(&sys);
        let mut dual = DualState::fresh(1, 2);
        let opts = SolveOptions::for_system(&sys, false, false);
        let out = dual_feasibility_solve(&sys, best - 3.0, &x0, &mut dual, &opts).unwrap();
        match out {
            Feasibility::Infeasible { certified, .. } => assert!(certified),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn lagrangian_gradient_matches_central_differences() {
        let cfg = config(2, 3);
        let sys = build(&cfg);
        let mut bufs = Buffers::new(&sys);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let opts = SolveOptions { optimize_gains: true, ..SolveOptions::default() };
        for _ in 0..10 {
            let x = PrimalPoint {
                p_hat: (0..2)
                    .map(|_| rng.gen_range((1e-5f64).ln()..(1e-2f64).ln()))
                    .collect(),
                g: (0..3).map(|_| rng.gen_range(3.0..4.5)).collect(),
            };
            let dual = DualState {
                lambda: (0..2).map(|_| rng.gen_range(0.1..2.0)).collect(),
                mu: (0..3).map(|_| rng.gen_range(0.0..1.0)).collect(),
                nu: vec![0.0; 3],
            };
            let beta = 0.3;
            lagrangian(&sys, &x, &dual, beta, &opts, &mut bufs, true);
            let grad_p = bufs.grad_p.clone();
            let grad_g = bufs.grad_g.clone();
            let h = 1e-5;
            for i in 0..2 {
                let mut xp = x.clone();
                xp.p_hat[i] += h;
                let up = lagrangian(&sys, &xp, &dual, beta, &opts, &mut bufs, false);
                xp.p_hat[i] -= 2.0 * h;
                let dn = lagrangian(&sys, &xp, &dual, beta, &opts, &mut bufs, false);
                let fd = (up - dn) / (2.0 * h);
                let rel = (grad_p[i] - fd).abs() / fd.abs().max(1e-9);
                assert!(rel < 1e-5, "p[{i}]: {} vs {fd}", grad_p[i]);
            }
            for s in 0..3 {
                let mut xg = x.clone();
                xg.g[s] += h;
                let up = lagrangian(&sys, &xg, &dual, beta, &opts, &mut bufs, false);
                xg.g[s] -= 2.0 * h;
                let dn = lagrangian(&sys, &xg, &dual, beta, &opts, &mut bufs, false);
                let fd = (up - dn) / (2.0 * h);
                let rel = (grad_g[s] - fd).abs() / fd.abs().max(1e-9);
                assert!(rel < 1e-5, "g[{s}]: {} vs {fd}", grad_g[s]);
            }
        }
    }

    #[test]
    fn feasibility_is_monotone_in_the_bound() {
        let cfg = config(2, 2);
        let sys = build(&cfg);
        let x0 = start(&sys);
        let opts = SolveOptions::for_system(&sys, false, false);

        // Both carriers are identical, so the per-carrier optimum coincides
        // with the best common power; scan it to center the probe grid.
        let g = sys.transparent_log_gains();
        let mut ws = sys.workspace();
        let mut margins = vec![0.0; 2];
        let m_star = (0..361)
            .map(|i| {
                let p = ((-12.0 + 0.05 * i as f64) - 30.0) * std::f64::consts::LN_10 / 10.0;
                sys.margins_into(&[p, p], &g, &mut ws, &mut margins);
                margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min);

        let mut verdicts = Vec::new();
        for delta in [-0.5, -0.25, 0.05, 0.3, 1.0] {
            let mut dual = DualState::fresh(sys.n_carriers(), sys.n_spans());
            let out =
                dual_feasibility_solve(&sys, m_star + delta, &x0, &mut dual, &opts).unwrap();
            verdicts.push(matches!(out, Feasibility::Feasible { .. }));
        }
        // Once feasible, larger bounds stay feasible.
        for pair in verdicts.windows(2) {
            assert!(!pair[0] || pair[1], "verdicts {verdicts:?}");
        }
        assert!(verdicts.last().copied().unwrap(), "loosest bound must be feasible");
        assert!(!verdicts[0], "a bound half a nat beyond the optimum must be rejected");
    }
}
