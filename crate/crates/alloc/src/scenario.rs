//! Planning scenarios: common power, per-carrier powers, and the joint
//! power-gain optimization.
//!
//! The common-power baseline sweeps a dBm grid and refines by golden
//! section. The other two scenarios bisect the worst-margin bound between
//! fixed brackets (+100 and -10 nats), running a dual feasibility solve at
//! each midpoint and keeping the last feasible iterate. Scenarios chain
//! warm starts: equal feeds power-only feeds joint. The joint scenario pins
//! the final span's gain at its cap, which improves every margin (nothing
//! propagates after the last amplifier) and leaves saturation untouched.

use std::fmt;

use fiberplan_core::SystemConfig;
use fiberplan_egn::XTensorSet;

use crate::dual::{
    dual_feasibility_solve, DualState, Feasibility, PrimalPoint, SolveOptions,
};
use crate::margin::MarginSystem;
use crate::AllocError;

const NAT_TO_DB: f64 = 10.0 / std::f64::consts::LN_10;
const BETA_HI: f64 = 100.0;
const BETA_LO: f64 = -10.0;
const SWEEP_LO_DBM: f64 = -12.0;
const SWEEP_HI_DBM: f64 = 6.0;
const SWEEP_STEP_DB: f64 = 0.1;
const REFINE_TOL_DB: f64 = 1e-4;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// One common launch power, loss-compensating gains.
    Equal,
    /// Per-carrier powers, gains fixed as in [`Scenario::Equal`].
    PowerOnly,
    /// Powers and gains optimized together.
    Joint,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Equal => "equal",
            Scenario::PowerOnly => "power",
            Scenario::Joint => "joint",
        })
    }
}

/// A planned operating point. Powers and gains are in log units; margins
/// per carrier in dB, ordered as [`MarginSystem::carriers`].
#[derive(Debug, Clone)]
pub struct Allocation {
    pub scenario: Scenario,
    /// Log launch power per carrier (log-watts at the first span input).
    pub p_hat: Vec<f64>,
    /// Log gain per span.
    pub g: Vec<f64>,
    /// Worst constraint value at the solution, nats; the bound made tight.
    pub beta: f64,
    pub margins_db: Vec<f64>,
    /// Bisection steps taken (zero for the sweep-based equal scenario).
    pub bisection_steps: usize,
    /// Total dual outer iterations, or sweep evaluations for equal.
    pub iterations: usize,
    /// False when any bisection step was decided by an uncertified
    /// iteration-cap timeout rather than a certificate or a feasible point.
    pub converged: bool,
}

impl Allocation {
    pub fn min_margin_db(&self) -> f64 {
        -self.beta * NAT_TO_DB
    }

    pub fn powers_dbm(&self) -> Vec<f64> {
        self.p_hat.iter().map(|&p| p * NAT_TO_DB + 30.0).collect()
    }

    pub fn gains_db(&self) -> Vec<f64> {
        self.g.iter().map(|&g| g * NAT_TO_DB).collect()
    }
}

fn dbm_to_nat(dbm: f64) -> f64 {
    (dbm - 30.0) / NAT_TO_DB
}

/// Worst constraint value over carriers at a common power, +inf where the
/// power would violate saturation.
fn common_power_objective(
    sys: &MarginSystem,
    dbm: f64,
    g: &[f64],
    ws: &mut crate::margin::MarginWorkspace,
    p_buf: &mut [f64],
    m_buf: &mut [f64],
) -> f64 {
    p_buf.fill(dbm_to_nat(dbm));
    for s in 0..sys.n_spans() {
        let sat = sys.saturation(s, p_buf, g, ws);
        if sat > sys.saturation_limit(s) * (1.0 + 1e-9) {
            return f64::INFINITY;
        }
    }
    sys.margins_into(p_buf, g, ws, m_buf);
    m_buf.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Samples the common-power margin curve: (dBm, worst constraint value in
/// nats) per grid point. Saturation-violating powers read +inf.
pub fn equal_power_sweep(
    sys: &MarginSystem,
    lo_dbm: f64,
    hi_dbm: f64,
    step_db: f64,
) -> Vec<(f64, f64)> {
    let mut ws = sys.workspace();
    let mut p_buf = vec![0.0; sys.n_carriers()];
    let mut m_buf = vec![0.0; sys.n_carriers()];
    let g = sys.transparent_log_gains();
    let n = ((hi_dbm - lo_dbm) / step_db).round() as usize + 1;
    (0..n)
        .map(|i| {
            let dbm = lo_dbm + i as f64 * step_db;
            (dbm, common_power_objective(sys, dbm, &g, &mut ws, &mut p_buf, &mut m_buf))
        })
        .collect()
}

fn golden_min(mut a: f64, mut b: f64, tol: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

fn finalize(
    sys: &MarginSystem,
    scenario: Scenario,
    x: PrimalPoint,
    bisection_steps: usize,
    iterations: usize,
    converged: bool,
) -> Result<Allocation, AllocError> {
    let mut ws = sys.workspace();
    let mut margins = vec![0.0; sys.n_carriers()];
    sys.margins_into(&x.p_hat, &x.g, &mut ws, &mut margins);
    let beta = margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !beta.is_finite() {
        return Err(AllocError::NonFinite("margins of the final allocation".into()));
    }
    // Saturation is verified on every returned allocation, including runs
    // with the constraint relaxed in the solver.
    for s in 0..sys.n_spans() {
        let total_w = sys.saturation(s, &x.p_hat, &x.g, &mut ws);
        let limit_w = sys.saturation_limit(s);
        if total_w > limit_w * (1.0 + 1e-9) {
            return Err(AllocError::Saturation { span: s, total_w, limit_w });
        }
    }
    Ok(Allocation {
        scenario,
        margins_db: margins.iter().map(|&m| -m * NAT_TO_DB).collect(),
        p_hat: x.p_hat,
        g: x.g,
        beta,
        bisection_steps,
        iterations,
        converged,
    })
}

fn equal_core(sys: &MarginSystem) -> Result<Allocation, AllocError> {
    let g = sys.transparent_log_gains();
    let mut ws = sys.workspace();
    let mut p_buf = vec![0.0; sys.n_carriers()];
    let mut m_buf = vec![0.0; sys.n_carriers()];
    let mut evals = 0usize;
    let mut objective = |dbm: f64| {
        evals += 1;
        common_power_objective(sys, dbm, &g, &mut ws, &mut p_buf, &mut m_buf)
    };

    let n = ((SWEEP_HI_DBM - SWEEP_LO_DBM) / SWEEP_STEP_DB).round() as usize + 1;
    let mut best = (f64::NAN, f64::INFINITY);
    for i in 0..n {
        let dbm = SWEEP_LO_DBM + i as f64 * SWEEP_STEP_DB;
        let v = objective(dbm);
        if v < best.1 {
            best = (dbm, v);
        }
    }
    if !best.1.is_finite() {
        return Err(AllocError::Bounds(
            "no common power in the sweep range satisfies saturation".into(),
        ));
    }
    let lo = (best.0 - SWEEP_STEP_DB).max(SWEEP_LO_DBM);
    let hi = (best.0 + SWEEP_STEP_DB).min(SWEEP_HI_DBM);
    let refined = golden_min(lo, hi, REFINE_TOL_DB, &mut objective);
    let pick = if objective(refined) <= best.1 { refined } else { best.0 };

    let x = PrimalPoint { p_hat: vec![dbm_to_nat(pick); sys.n_carriers()], g };
    finalize(sys, Scenario::Equal, x, 0, evals, true)
}

fn bisect(
    sys: &MarginSystem,
    scenario: Scenario,
    x0: PrimalPoint,
    optimize_gains: bool,
    pin_last_gain: bool,
) -> Result<Allocation, AllocError> {
    let opts = SolveOptions::for_system(sys, optimize_gains, pin_last_gain);
    let eps = sys.knobs().bisection_epsilon;
    let mut dual = DualState::fresh(sys.n_carriers(), sys.n_spans());
    let mut total_outer = 0usize;
    let mut all_certified = true;

    let mut best = match dual_feasibility_solve(sys, BETA_HI, &x0, &mut dual, &opts)? {
        Feasibility::Feasible { point, outer_iterations } => {
            total_outer += outer_iterations;
            point
        }
        Feasibility::Infeasible { .. } => {
            return Err(AllocError::Bounds(
                "infeasible even at the +100 nat margin bound; the configuration \
                 cannot carry its lightpaths"
                    .into(),
            ));
        }
    };
    let mut lo_dual = DualState::fresh(sys.n_carriers(), sys.n_spans());
    match dual_feasibility_solve(sys, BETA_LO, &x0, &mut lo_dual, &opts)? {
        Feasibility::Feasible { .. } => {
            return Err(AllocError::Bounds(
                "already feasible at the -10 nat margin bound (over 43 dB of margin); \
                 bounds do not bracket the optimum"
                    .into(),
            ));
        }
        Feasibility::Infeasible { certified, outer_iterations } => {
            total_outer += outer_iterations;
            all_certified &= certified;
        }
    }

    let (mut lo, mut hi) = (BETA_LO, BETA_HI);
    let mut steps = 0usize;
    while hi - lo > eps {
        let mid = 0.5 * (hi + lo);
        steps += 1;
        match dual_feasibility_solve(sys, mid, &best, &mut dual, &opts)? {
            Feasibility::Feasible { point, outer_iterations } => {
                total_outer += outer_iterations;
                best = point;
                hi = mid;
            }
            Feasibility::Infeasible { certified, outer_iterations } => {
                total_outer += outer_iterations;
                all_certified &= certified;
                lo = mid;
            }
        }
    }
    finalize(sys, scenario, best, steps, total_outer, all_certified)
}

fn power_core(sys: &MarginSystem, warm: &Allocation) -> Result<Allocation, AllocError> {
    let x0 = PrimalPoint { p_hat: warm.p_hat.clone(), g: warm.g.clone() };
    bisect(sys, Scenario::PowerOnly, x0, false, false)
}

fn joint_core(sys: &MarginSystem, warm: &Allocation) -> Result<Allocation, AllocError> {
    let mut g = warm.g.clone();
    let last = sys.n_spans() - 1;
    g[last] = sys.gain_caps()[last];
    let x0 = PrimalPoint { p_hat: warm.p_hat.clone(), g };
    bisect(sys, Scenario::Joint, x0, true, true)
}

/// Best common launch power with loss-compensating gains.
pub fn scenario_equal_power(
    cfg: &SystemConfig,
    xt: &XTensorSet,
) -> Result<Allocation, AllocError> {
    let sys = MarginSystem::build(cfg, xt)?;
    equal_core(&sys)
}

/// Per-carrier powers, gains held at the loss-compensating values.
pub fn scenario_power_only(
    cfg: &SystemConfig,
    xt: &XTensorSet,
) -> Result<Allocation, AllocError> {
    let sys = MarginSystem::build(cfg, xt)?;
    let equal = equal_core(&sys)?;
    power_core(&sys, &equal)
}

/// Joint power and gain optimization.
pub fn scenario_joint(cfg: &SystemConfig, xt: &XTensorSet) -> Result<Allocation, AllocError> {
    let sys = MarginSystem::build(cfg, xt)?;
    let equal = equal_core(&sys)?;
    let power = power_core(&sys, &equal)?;
    joint_core(&sys, &power)
}

/// The full max-min optimization; alias for the joint scenario.
pub fn bisection_optimize(
    cfg: &SystemConfig,
    xt: &XTensorSet,
) -> Result<Allocation, AllocError> {
    scenario_joint(cfg, xt)
}

/// All three scenarios with shared compilation and chained warm starts,
/// in order equal, power-only, joint.
pub fn optimize_all(
    cfg: &SystemConfig,
    xt: &XTensorSet,
) -> Result<[Allocation; 3], AllocError> {
    let sys = MarginSystem::build(cfg, xt)?;
    let equal = equal_core(&sys)?;
    let power = power_core(&sys, &equal)?;
    let joint = joint_core(&sys, &power)?;
    Ok([equal, power, joint])
}
