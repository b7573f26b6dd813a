//! Launch-power and amplifier-gain planning over the analytic interference
//! model.
//!
//! The planner maximizes the minimum SNR margin across all carriers of a
//! link. In log coordinates (log-powers `p_hat`, log-gains `g`) every noise
//! contribution is an exponential of an affine expression, so each carrier's
//! margin constraint is a log-sum-exp and the feasibility region for a given
//! margin bound is convex (up to the spontaneous-emission factor `e^g - 1`,
//! which is kept exact). The max-min problem is solved by bisection on the
//! margin bound with a Lagrangian-dual feasibility solve at each candidate.
//!
//! Three scenarios are supported: a common launch power with
//! loss-compensating gains, per-carrier powers with the same fixed gains,
//! and the joint optimization of powers and gains.

pub mod dual;
pub mod htensor;
pub mod margin;
pub mod scenario;

pub use dual::{dual_feasibility_solve, DualState, Feasibility, PrimalPoint, SolveOptions};
pub use htensor::{reshape_to_h, HTensorSet};
pub use margin::{margin_constraint_value, MarginSystem, MarginWorkspace};
pub use scenario::{
    bisection_optimize, equal_power_sweep, optimize_all, scenario_equal_power,
    scenario_joint, scenario_power_only, Allocation, Scenario,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AllocError {
    #[error("link has no spans")]
    EmptyLink,
    #[error("no carriers are assigned to any lightpath")]
    NoCarriers,
    #[error("carrier index {0} out of range")]
    CarrierIndex(usize),
    #[error("bisection bounds invalid: {0}")]
    Bounds(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("saturation violated at span {span}: {total_w:.3e} W > {limit_w:.3e} W")]
    Saturation { span: usize, total_w: f64, limit_w: f64 },
}
