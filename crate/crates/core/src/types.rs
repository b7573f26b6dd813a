//! Core domain types: channel plan, fibres and modes, amplifiers, spans,
//! lightpaths and the assembled system description.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::moments::{ConstellationMoments, Cumulants, KappaConvention};
use crate::units::wavelength_to_frequency;

/// Maximum tolerated relative asymmetry of the mode coupling matrix before a
/// config is rejected instead of symmetrised.
pub const COUPLING_ASYMMETRY_LIMIT: f64 = 0.05;

/// WDM grid shared by every carrier: uniform symbol rate, bandwidth and
/// spacing around a common centre frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub n_channels: usize,
    /// Symbol rate, Hz (baud).
    pub symbol_rate: f64,
    /// Occupied bandwidth per channel, Hz.
    pub bandwidth: f64,
    /// Grid spacing, Hz.
    pub spacing: f64,
    /// Absolute optical centre frequency of the grid, Hz.
    pub center_frequency: f64,
}

impl ChannelPlan {
    /// Baseband offset of channel `ch` (0-based) from the grid centre, Hz.
    pub fn channel_offset(&self, ch: usize) -> f64 {
        let mid = 0.5 * (self.n_channels as f64 - 1.0);
        (ch as f64 - mid) * self.spacing
    }

    /// Occupied band of channel `ch` as `(low, high)` baseband frequencies.
    pub fn channel_band(&self, ch: usize) -> (f64, f64) {
        let mu = self.channel_offset(ch);
        (mu - 0.5 * self.bandwidth, mu + 0.5 * self.bandwidth)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_channels == 0 {
            return Err(ConfigError::validation("channel plan needs at least one channel"));
        }
        for (name, v) in [
            ("symbol_rate", self.symbol_rate),
            ("bandwidth", self.bandwidth),
            ("spacing", self.spacing),
            ("center_frequency", self.center_frequency),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::validation(format!("{name} must be positive")));
            }
        }
        if self.bandwidth > self.spacing {
            return Err(ConfigError::validation(format!(
                "channel bandwidth {} Hz exceeds grid spacing {} Hz",
                self.bandwidth, self.spacing
            )));
        }
        if self.symbol_rate > self.bandwidth + 1e-6 {
            return Err(ConfigError::validation(
                "symbol rate exceeds channel bandwidth (sub-Nyquist plan unsupported)",
            ));
        }
        Ok(())
    }
}

/// Per-mode propagation constants. Dispersion is the Taylor expansion of the
/// propagation constant around the grid centre:
/// `beta(f) = beta0 + beta1 w + beta2/2 w^2 + beta3/6 w^3` with `w = 2 pi f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub name: String,
    /// Power attenuation coefficient, 1/km.
    pub attenuation: f64,
    /// rad/km.
    pub beta0: f64,
    /// Group delay slope relative to the fundamental mode, s/km.
    pub beta1: f64,
    /// s^2/km.
    pub beta2: f64,
    /// s^3/km.
    pub beta3: f64,
}

/// A fibre type: nonlinear coefficient, its guided modes and the pairwise
/// nonlinear coupling factors between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub name: String,
    /// Nonlinear coefficient, 1/(W km).
    pub gamma: f64,
    pub modes: Vec<ModeSpec>,
    /// Symmetrised mode overlap factors `f[p][q]`, dimensionless.
    pub coupling: Vec<Vec<f64>>,
}

impl FiberSpec {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Builds a fibre, symmetrising the coupling matrix as `(f_pq + f_qp)/2`.
    /// Rejects matrices whose asymmetry exceeds [`COUPLING_ASYMMETRY_LIMIT`].
    pub fn new(
        name: impl Into<String>,
        gamma: f64,
        modes: Vec<ModeSpec>,
        raw_coupling: Vec<Vec<f64>>,
    ) -> Result<Self, ConfigError> {
        let d = modes.len();
        if raw_coupling.len() != d || raw_coupling.iter().any(|row| row.len() != d) {
            return Err(ConfigError::validation(format!(
                "coupling matrix must be {d}x{d} to match the mode list"
            )));
        }
        let mut coupling = vec![vec![0.0; d]; d];
        for p in 0..d {
            for q in 0..d {
                let a = raw_coupling[p][q];
                let b = raw_coupling[q][p];
                let m = a.abs().max(b.abs());
                if m > 0.0 && (a - b).abs() / m > COUPLING_ASYMMETRY_LIMIT {
                    return Err(ConfigError::validation(format!(
                        "coupling asymmetry between modes {p} and {q} exceeds {:.0}%: {a} vs {b}",
                        COUPLING_ASYMMETRY_LIMIT * 100.0
                    )));
                }
                coupling[p][q] = 0.5 * (a + b);
            }
        }
        let fiber = Self { name: name.into(), gamma, modes, coupling };
        fiber.validate()?;
        Ok(fiber)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.modes.is_empty() {
            return Err(ConfigError::validation("fiber must guide at least one mode"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(ConfigError::validation("gamma must be nonnegative"));
        }
        let mut names: Vec<&str> = self.modes.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.modes.len() {
            return Err(ConfigError::validation("mode names must be unique within a fiber"));
        }
        for m in &self.modes {
            if !(m.attenuation.is_finite() && m.attenuation >= 0.0) {
                return Err(ConfigError::validation(format!(
                    "mode {}: attenuation must be nonnegative",
                    m.name
                )));
            }
            for (field, v) in [("beta0", m.beta0), ("beta1", m.beta1), ("beta2", m.beta2), ("beta3", m.beta3)]
            {
                if !v.is_finite() {
                    return Err(ConfigError::validation(format!(
                        "mode {}: {field} must be finite",
                        m.name
                    )));
                }
            }
        }
        for row in &self.coupling {
            if row.iter().any(|&f| !(f.is_finite() && f >= 0.0)) {
                return Err(ConfigError::validation("coupling factors must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Multimode EDFA limits and noise figure (all linear).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplifierSpec {
    pub name: String,
    /// Linear noise figure.
    pub noise_figure: f64,
    /// Maximum linear gain.
    pub max_gain: f64,
    /// Total input saturation power, W.
    pub saturation_power: f64,
}

impl AmplifierSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.noise_figure.is_finite() && self.noise_figure >= 1.0) {
            return Err(ConfigError::validation("noise figure must be >= 1 (linear)"));
        }
        if !(self.max_gain.is_finite() && self.max_gain >= 1.0) {
            return Err(ConfigError::validation("max gain must be >= 1 (linear)"));
        }
        if !(self.saturation_power.is_finite() && self.saturation_power > 0.0) {
            return Err(ConfigError::validation("saturation power must be positive"));
        }
        Ok(())
    }
}

/// One fibre span terminated by its amplifier. `fiber` and `amplifier` index
/// into [`SystemConfig::fibers`] / [`SystemConfig::amplifiers`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanSpec {
    pub length_km: f64,
    pub fiber: usize,
    pub amplifier: usize,
}

/// A routed service: a contiguous run of spans carrying a set of
/// (channel, mode) carriers with a common SNR requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lightpath {
    pub id: String,
    /// First span index, 0-based inclusive.
    pub first_span: usize,
    /// Last span index, 0-based inclusive.
    pub last_span: usize,
    /// Carriers as (channel, mode), 0-based.
    pub carriers: Vec<(usize, usize)>,
    /// Linear SNR required by the modulation/FEC choice.
    pub required_snr: f64,
}

/// Physical line system: ordered spans plus the transmit-side booster and the
/// logical lightpath overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTopology {
    pub spans: Vec<SpanSpec>,
    /// Linear gain of the fixed booster amplifier at each transmitter.
    pub booster_gain: f64,
    pub nodes: Vec<String>,
    pub lightpaths: Vec<Lightpath>,
}

/// A carrier is one (channel, mode) pair assigned to a lightpath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Carrier {
    pub channel: usize,
    pub mode: usize,
    pub lightpath: usize,
}

/// Fully validated system description; the unit of work for every engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub plan: ChannelPlan,
    pub fibers: Vec<FiberSpec>,
    pub amplifiers: Vec<AmplifierSpec>,
    pub link: LinkTopology,
    /// Receiver-side noise variance per carrier, W.
    pub receiver_noise: f64,
    pub constellation: ConstellationMoments,
    pub kappa_convention: KappaConvention,
    pub solver: SolverKnobs,
}

/// Numerical knobs with defaults; overridable from the config file or CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverKnobs {
    /// Quadrature nodes per channel bandwidth per axis.
    pub quad_points_per_band: u32,
    /// Bisection stops when the bracket shrinks below this width (nats).
    pub bisection_epsilon: f64,
    /// Outer dual iteration cap per feasibility solve.
    pub max_outer_iterations: usize,
    /// Initial dual step size, decayed as 1/sqrt(t).
    pub dual_step: f64,
    /// Drop the amplifier saturation constraints when true.
    pub relax_saturation: bool,
}

impl Default for SolverKnobs {
    fn default() -> Self {
        Self {
            quad_points_per_band: 32,
            bisection_epsilon: 1e-3,
            max_outer_iterations: 5000,
            dual_step: 0.05,
            relax_saturation: false,
        }
    }
}

impl SystemConfig {
    /// Mode count; validation guarantees it is uniform across spans.
    pub fn n_modes(&self) -> usize {
        self.fibers[self.link.spans[0].fiber].n_modes()
    }

    pub fn n_spans(&self) -> usize {
        self.link.spans.len()
    }

    pub fn span_fiber(&self, s: usize) -> &FiberSpec {
        &self.fibers[self.link.spans[s].fiber]
    }

    pub fn span_amplifier(&self, s: usize) -> &AmplifierSpec {
        &self.amplifiers[self.link.spans[s].amplifier]
    }

    /// Power transmittance of span `s` using the fundamental-mode attenuation.
    pub fn span_transmittance(&self, s: usize) -> f64 {
        let span = &self.link.spans[s];
        let alpha = self.fibers[span.fiber].modes[0].attenuation;
        (-alpha * span.length_km).exp()
    }

    /// Per-channel cumulants (uniform constellation across the grid).
    pub fn channel_cumulants(&self) -> Vec<Cumulants> {
        vec![self.constellation.cumulants(self.kappa_convention); self.plan.n_channels]
    }

    /// Assigned carriers in channel-major order: (ch 0, mode 0..D), (ch 1, ...).
    pub fn carriers(&self) -> Vec<Carrier> {
        let d = self.n_modes();
        let mut slot = vec![None; self.plan.n_channels * d];
        for (lp_idx, lp) in self.link.lightpaths.iter().enumerate() {
            for &(ch, mode) in &lp.carriers {
                slot[ch * d + mode] = Some(lp_idx);
            }
        }
        slot.iter()
            .enumerate()
            .filter_map(|(i, lp)| {
                lp.map(|lightpath| Carrier { channel: i / d, mode: i % d, lightpath })
            })
            .collect()
    }

    /// Span range (first, last inclusive) of the carrier's lightpath.
    pub fn carrier_spans(&self, c: &Carrier) -> (usize, usize) {
        let lp = &self.link.lightpaths[c.lightpath];
        (lp.first_span, lp.last_span)
    }

    /// `present[ch * D + mode]` for span `s`.
    pub fn span_occupancy(&self, s: usize) -> Vec<bool> {
        let d = self.n_modes();
        let mut present = vec![false; self.plan.n_channels * d];
        for lp in &self.link.lightpaths {
            if s >= lp.first_span && s <= lp.last_span {
                for &(ch, mode) in &lp.carriers {
                    present[ch * d + mode] = true;
                }
            }
        }
        present
    }

    /// Loss-compensating gain for span `s`, capped at the amplifier limit.
    pub fn transparent_gain(&self, s: usize) -> f64 {
        let g = 1.0 / self.span_transmittance(s);
        g.min(self.span_amplifier(s).max_gain)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.plan.validate()?;
        self.constellation.validate()?;
        if self.fibers.is_empty() {
            return Err(ConfigError::validation("no fibers defined"));
        }
        if self.amplifiers.is_empty() {
            return Err(ConfigError::validation("no amplifiers defined"));
        }
        for f in &self.fibers {
            f.validate()?;
        }
        for a in &self.amplifiers {
            a.validate()?;
        }
        if self.link.spans.is_empty() {
            return Err(ConfigError::validation("link must contain at least one span"));
        }
        if !(self.link.booster_gain.is_finite() && self.link.booster_gain >= 1.0) {
            return Err(ConfigError::validation("booster gain must be >= 1 (linear)"));
        }
        if !(self.receiver_noise.is_finite() && self.receiver_noise > 0.0) {
            return Err(ConfigError::validation("receiver noise power must be positive"));
        }
        let d = self.fibers[self.link.spans[0].fiber].n_modes();
        for (s, span) in self.link.spans.iter().enumerate() {
            if span.fiber >= self.fibers.len() {
                return Err(ConfigError::validation(format!("span {s}: fiber index out of range")));
            }
            if span.amplifier >= self.amplifiers.len() {
                return Err(ConfigError::validation(format!(
                    "span {s}: amplifier index out of range"
                )));
            }
            if !(span.length_km.is_finite() && span.length_km > 0.0) {
                return Err(ConfigError::validation(format!(
                    "span {s}: length must be positive"
                )));
            }
            if self.fibers[span.fiber].n_modes() != d {
                return Err(ConfigError::validation(
                    "all spans must guide the same number of modes",
                ));
            }
            let t = self.span_transmittance(s);
            if !(t > 0.0 && t <= 1.0) {
                return Err(ConfigError::validation(format!(
                    "span {s}: transmittance {t} outside (0, 1]"
                )));
            }
        }
        if self.link.lightpaths.is_empty() {
            return Err(ConfigError::validation("at least one lightpath is required"));
        }
        let n_spans = self.link.spans.len();
        // (ch, mode) -> claiming lightpath per span; collisions are fatal.
        let mut claims: Vec<Vec<Option<usize>>> =
            vec![vec![None; self.plan.n_channels * d]; n_spans];
        for (lp_idx, lp) in self.link.lightpaths.iter().enumerate() {
            if lp.first_span > lp.last_span || lp.last_span >= n_spans {
                return Err(ConfigError::validation(format!(
                    "lightpath {}: span range {}..={} invalid for {} spans",
                    lp.id, lp.first_span, lp.last_span, n_spans
                )));
            }
            if !(lp.required_snr.is_finite() && lp.required_snr > 0.0) {
                return Err(ConfigError::validation(format!(
                    "lightpath {}: required SNR must be positive",
                    lp.id
                )));
            }
            if lp.carriers.is_empty() {
                return Err(ConfigError::validation(format!(
                    "lightpath {}: carrier list is empty",
                    lp.id
                )));
            }
            let mut seen = std::collections::HashSet::new();
            for &(ch, mode) in &lp.carriers {
                if ch >= self.plan.n_channels || mode >= d {
                    return Err(ConfigError::validation(format!(
                        "lightpath {}: carrier ({ch}, {mode}) out of range",
                        lp.id
                    )));
                }
                if !seen.insert((ch, mode)) {
                    return Err(ConfigError::validation(format!(
                        "lightpath {}: duplicate carrier ({ch}, {mode})",
                        lp.id
                    )));
                }
                for span_claims in claims.iter_mut().take(lp.last_span + 1).skip(lp.first_span) {
                    let cell = &mut span_claims[ch * d + mode];
                    if let Some(other) = *cell {
                        return Err(ConfigError::validation(format!(
                            "wavelength collision: ({ch}, {mode}) claimed by lightpaths {} and {}",
                            self.link.lightpaths[other].id, lp.id
                        )));
                    }
                    *cell = Some(lp_idx);
                }
            }
        }
        if self.solver.quad_points_per_band < 8 {
            return Err(ConfigError::validation(
                "quadrature resolution below minimum of 8 points per band",
            ));
        }
        if !(self.solver.bisection_epsilon > 0.0) {
            return Err(ConfigError::validation("bisection epsilon must be positive"));
        }
        Ok(())
    }
}

/// Convenience constructor for a grid centred on a given wavelength.
pub fn center_frequency_from_wavelength(lambda_m: f64) -> f64 {
    wavelength_to_frequency(lambda_m)
}
