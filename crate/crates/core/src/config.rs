//! Config file ingestion.
//!
//! System descriptions are TOML documents in which every dimensioned quantity
//! is an inline table `{ value = <number>, unit = "<string>" }`. Units are
//! converted on load; the in-memory model uses W, Hz, km and linear ratios
//! throughout. Channel and span indices are 1-based in files and 0-based in
//! memory. A span entry may carry `count = N` to expand into N identical
//! spans.

use std::path::Path;

use serde::Deserialize;

use crate::error::ConfigError;
use crate::moments::{ConstellationMoments, KappaConvention};
use crate::types::{
    AmplifierSpec, ChannelPlan, FiberSpec, Lightpath, LinkTopology, ModeSpec, SolverKnobs,
    SpanSpec, SystemConfig,
};
use crate::units::{db_per_km_to_linear, db_to_linear, dbm_to_watts, wavelength_to_frequency};

/// A number paired with its unit, exactly as written in the file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    fn bad_unit(&self, field: &str, expected: &str) -> ConfigError {
        ConfigError::Unit {
            field: field.to_string(),
            unit: self.unit.clone(),
            expected: expected.to_string(),
        }
    }

    pub fn frequency_hz(&self, field: &str) -> Result<f64, ConfigError> {
        let factor = match self.unit.as_str() {
            "Hz" | "Bd" => 1.0,
            "kHz" | "kBd" => 1e3,
            "MHz" | "MBd" => 1e6,
            "GHz" | "GBd" => 1e9,
            "THz" => 1e12,
            _ => return Err(self.bad_unit(field, "Hz, kHz, MHz, GHz, THz, Bd, kBd, MBd, GBd")),
        };
        Ok(self.value * factor)
    }

    pub fn wavelength_m(&self, field: &str) -> Result<f64, ConfigError> {
        let factor = match self.unit.as_str() {
            "m" => 1.0,
            "um" | "µm" => 1e-6,
            "nm" => 1e-9,
            _ => return Err(self.bad_unit(field, "m, um, nm")),
        };
        Ok(self.value * factor)
    }

    pub fn power_watts(&self, field: &str) -> Result<f64, ConfigError> {
        match self.unit.as_str() {
            "W" => Ok(self.value),
            "mW" => Ok(self.value * 1e-3),
            "uW" | "µW" => Ok(self.value * 1e-6),
            "nW" => Ok(self.value * 1e-9),
            "dBm" => Ok(dbm_to_watts(self.value)),
            _ => Err(self.bad_unit(field, "W, mW, uW, nW, dBm")),
        }
    }

    pub fn linear_ratio(&self, field: &str) -> Result<f64, ConfigError> {
        match self.unit.as_str() {
            "dB" => Ok(db_to_linear(self.value)),
            "linear" | "1" => Ok(self.value),
            _ => Err(self.bad_unit(field, "dB, linear")),
        }
    }

    pub fn attenuation_per_km(&self, field: &str) -> Result<f64, ConfigError> {
        match self.unit.as_str() {
            "dB/km" => Ok(db_per_km_to_linear(self.value)),
            "1/km" => Ok(self.value),
            _ => Err(self.bad_unit(field, "dB/km, 1/km")),
        }
    }

    pub fn length_km(&self, field: &str) -> Result<f64, ConfigError> {
        match self.unit.as_str() {
            "km" => Ok(self.value),
            "m" => Ok(self.value * 1e-3),
            _ => Err(self.bad_unit(field, "km, m")),
        }
    }

    pub fn nonlinear_coeff(&self, field: &str) -> Result<f64, ConfigError> {
        match self.unit.as_str() {
            "1/W/km" | "1/(W km)" | "1/(W*km)" => Ok(self.value),
            _ => Err(self.bad_unit(field, "1/W/km")),
        }
    }

    pub fn group_delay_s_per_km(&self, field: &str) -> Result<f64, ConfigError> {
        let factor = match self.unit.as_str() {
            "s/km" => 1.0,
            "ns/km" => 1e-9,
            "ps/km" => 1e-12,
            _ => return Err(self.bad_unit(field, "s/km, ns/km, ps/km")),
        };
        Ok(self.value * factor)
    }

    pub fn gvd_s2_per_km(&self, field: &str) -> Result<f64, ConfigError> {
        let factor = match self.unit.as_str() {
            "s^2/km" => 1.0,
            "ps^2/km" | "ps2/km" => 1e-24,
            _ => return Err(self.bad_unit(field, "s^2/km, ps^2/km")),
        };
        Ok(self.value * factor)
    }

    pub fn dispersion_slope_s3_per_km(&self, field: &str) -> Result<f64, ConfigError> {
        let factor = match self.unit.as_str() {
            "s^3/km" => 1.0,
            "ps^3/km" | "ps3/km" => 1e-36,
            _ => return Err(self.bad_unit(field, "s^3/km, ps^3/km")),
        };
        Ok(self.value * factor)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plan: RawPlan,
    constellation: RawConstellation,
    receiver: RawReceiver,
    #[serde(rename = "fiber")]
    fibers: Vec<RawFiber>,
    #[serde(rename = "amplifier")]
    amplifiers: Vec<RawAmplifier>,
    link: RawLink,
    #[serde(rename = "lightpath")]
    lightpaths: Vec<RawLightpath>,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    n_channels: usize,
    symbol_rate: Quantity,
    bandwidth: Quantity,
    spacing: Quantity,
    center_frequency: Option<Quantity>,
    center_wavelength: Option<Quantity>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstellation {
    preset: Option<String>,
    mu2: Option<f64>,
    mu4: Option<f64>,
    mu6: Option<f64>,
    kappa_convention: Option<KappaConvention>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReceiver {
    noise_power: Quantity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFiber {
    name: String,
    gamma: Quantity,
    #[serde(rename = "mode")]
    modes: Vec<RawMode>,
    coupling: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    name: String,
    attenuation: Quantity,
    #[serde(default)]
    beta0: f64,
    beta1: Option<Quantity>,
    beta2: Option<Quantity>,
    beta3: Option<Quantity>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAmplifier {
    name: String,
    noise_figure: Quantity,
    max_gain: Quantity,
    saturation_power: Quantity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    booster_gain: Quantity,
    #[serde(default)]
    nodes: Vec<String>,
    #[serde(rename = "span")]
    spans: Vec<RawSpan>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpan {
    length: Quantity,
    fiber: String,
    amplifier: String,
    #[serde(default)]
    count: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLightpath {
    id: String,
    first_span: usize,
    last_span: usize,
    channels: Vec<usize>,
    modes: Vec<String>,
    required_snr: Quantity,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    quad_points_per_band: Option<u32>,
    bisection_epsilon: Option<f64>,
    max_outer_iterations: Option<usize>,
    dual_step: Option<f64>,
    relax_saturation: Option<bool>,
}

/// Parses and validates a TOML system description.
pub fn parse_config(text: &str) -> Result<SystemConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    build(raw)
}

/// Reads, parses and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SystemConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn build(raw: RawConfig) -> Result<SystemConfig, ConfigError> {
    let center_frequency = match (&raw.plan.center_frequency, &raw.plan.center_wavelength) {
        (Some(f), None) => f.frequency_hz("plan.center_frequency")?,
        (None, Some(l)) => wavelength_to_frequency(l.wavelength_m("plan.center_wavelength")?),
        (Some(_), Some(_)) => {
            return Err(ConfigError::validation(
                "give either plan.center_frequency or plan.center_wavelength, not both",
            ))
        }
        (None, None) => {
            return Err(ConfigError::validation(
                "plan needs center_frequency or center_wavelength",
            ))
        }
    };
    let plan = ChannelPlan {
        n_channels: raw.plan.n_channels,
        symbol_rate: raw.plan.symbol_rate.frequency_hz("plan.symbol_rate")?,
        bandwidth: raw.plan.bandwidth.frequency_hz("plan.bandwidth")?,
        spacing: raw.plan.spacing.frequency_hz("plan.spacing")?,
        center_frequency,
    };

    let constellation = match raw.constellation.preset.as_deref() {
        Some(p) => {
            if raw.constellation.mu2.is_some()
                || raw.constellation.mu4.is_some()
                || raw.constellation.mu6.is_some()
            {
                return Err(ConfigError::validation(
                    "constellation preset and explicit moments are mutually exclusive",
                ));
            }
            match p {
                "qpsk" | "psk" => ConstellationMoments::psk(),
                "gaussian" => ConstellationMoments::gaussian(),
                "16qam" | "qam16" => ConstellationMoments::qam16(),
                other => {
                    return Err(ConfigError::validation(format!(
                        "unknown constellation preset '{other}' (qpsk, gaussian, 16qam)"
                    )))
                }
            }
        }
        None => match (raw.constellation.mu2, raw.constellation.mu4, raw.constellation.mu6) {
            (Some(mu2), Some(mu4), Some(mu6)) => ConstellationMoments { mu2, mu4, mu6 },
            _ => {
                return Err(ConfigError::validation(
                    "constellation needs a preset or all of mu2, mu4, mu6",
                ))
            }
        },
    };
    let kappa_convention = raw.constellation.kappa_convention.unwrap_or_default();

    let mut fibers = Vec::with_capacity(raw.fibers.len());
    for rf in &raw.fibers {
        let mut modes = Vec::with_capacity(rf.modes.len());
        for rm in &rf.modes {
            let field = |s: &str| format!("fiber.{}.mode.{}.{s}", rf.name, rm.name);
            modes.push(ModeSpec {
                name: rm.name.clone(),
                attenuation: rm.attenuation.attenuation_per_km(&field("attenuation"))?,
                beta0: rm.beta0,
                beta1: rm
                    .beta1
                    .as_ref()
                    .map(|q| q.group_delay_s_per_km(&field("beta1")))
                    .transpose()?
                    .unwrap_or(0.0),
                beta2: rm
                    .beta2
                    .as_ref()
                    .map(|q| q.gvd_s2_per_km(&field("beta2")))
                    .transpose()?
                    .unwrap_or(0.0),
                beta3: rm
                    .beta3
                    .as_ref()
                    .map(|q| q.dispersion_slope_s3_per_km(&field("beta3")))
                    .transpose()?
                    .unwrap_or(0.0),
            });
        }
        let gamma = rf.gamma.nonlinear_coeff(&format!("fiber.{}.gamma", rf.name))?;
        fibers.push(FiberSpec::new(rf.name.clone(), gamma, modes, rf.coupling.clone())?);
    }

    let mut amplifiers = Vec::with_capacity(raw.amplifiers.len());
    for ra in &raw.amplifiers {
        let field = |s: &str| format!("amplifier.{}.{s}", ra.name);
        amplifiers.push(AmplifierSpec {
            name: ra.name.clone(),
            noise_figure: ra.noise_figure.linear_ratio(&field("noise_figure"))?,
            max_gain: ra.max_gain.linear_ratio(&field("max_gain"))?,
            saturation_power: ra.saturation_power.power_watts(&field("saturation_power"))?,
        });
    }

    let find = |names: &[String], name: &str, field: &str| -> Result<usize, ConfigError> {
        names.iter().position(|n| n == name).ok_or_else(|| ConfigError::UnknownReference {
            field: field.to_string(),
            name: name.to_string(),
        })
    };
    let fiber_names: Vec<String> = fibers.iter().map(|f| f.name.clone()).collect();
    let amp_names: Vec<String> = amplifiers.iter().map(|a| a.name.clone()).collect();

    let mut spans = Vec::new();
    for (i, rs) in raw.link.spans.iter().enumerate() {
        let count = rs.count.unwrap_or(1);
        if count == 0 {
            return Err(ConfigError::validation(format!("link.span[{i}]: count must be >= 1")));
        }
        let span = SpanSpec {
            length_km: rs.length.length_km(&format!("link.span[{i}].length"))?,
            fiber: find(&fiber_names, &rs.fiber, &format!("link.span[{i}].fiber"))?,
            amplifier: find(&amp_names, &rs.amplifier, &format!("link.span[{i}].amplifier"))?,
        };
        spans.extend(std::iter::repeat(span).take(count));
    }
    let booster_gain = raw.link.booster_gain.linear_ratio("link.booster_gain")?;

    let mut lightpaths = Vec::with_capacity(raw.lightpaths.len());
    for rl in &raw.lightpaths {
        if rl.first_span == 0 || rl.last_span == 0 {
            return Err(ConfigError::validation(format!(
                "lightpath {}: span indices are 1-based",
                rl.id
            )));
        }
        let first_span = rl.first_span - 1;
        let last_span = rl.last_span - 1;
        if first_span >= spans.len() {
            return Err(ConfigError::validation(format!(
                "lightpath {}: first_span {} beyond the {} configured spans",
                rl.id,
                rl.first_span,
                spans.len()
            )));
        }
        let fiber = &fibers[spans[first_span].fiber];
        let mut mode_idx = Vec::with_capacity(rl.modes.len());
        for name in &rl.modes {
            mode_idx.push(
                fiber.modes.iter().position(|m| &m.name == name).ok_or_else(|| {
                    ConfigError::UnknownReference {
                        field: format!("lightpath.{}.modes", rl.id),
                        name: name.clone(),
                    }
                })?,
            );
        }
        let mut carriers = Vec::with_capacity(rl.channels.len() * mode_idx.len());
        for &ch in &rl.channels {
            if ch == 0 {
                return Err(ConfigError::validation(format!(
                    "lightpath {}: channel indices are 1-based",
                    rl.id
                )));
            }
            for &m in &mode_idx {
                carriers.push((ch - 1, m));
            }
        }
        lightpaths.push(Lightpath {
            id: rl.id.clone(),
            first_span,
            last_span,
            carriers,
            required_snr: rl
                .required_snr
                .linear_ratio(&format!("lightpath.{}.required_snr", rl.id))?,
        });
    }

    let defaults = SolverKnobs::default();
    let solver = SolverKnobs {
        quad_points_per_band: raw
            .solver
            .quad_points_per_band
            .unwrap_or(defaults.quad_points_per_band),
        bisection_epsilon: raw.solver.bisection_epsilon.unwrap_or(defaults.bisection_epsilon),
        max_outer_iterations: raw
            .solver
            .max_outer_iterations
            .unwrap_or(defaults.max_outer_iterations),
        dual_step: raw.solver.dual_step.unwrap_or(defaults.dual_step),
        relax_saturation: raw.solver.relax_saturation.unwrap_or(defaults.relax_saturation),
    };

    let cfg = SystemConfig {
        plan,
        fibers,
        amplifiers,
        link: LinkTopology { spans, booster_gain, nodes: raw.link.nodes, lightpaths },
        receiver_noise: raw.receiver.noise_power.power_watts("receiver.noise_power")?,
        constellation,
        kappa_convention,
        solver,
    };
    cfg.validate()?;
    Ok(cfg)
}
