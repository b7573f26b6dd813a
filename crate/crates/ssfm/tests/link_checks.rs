//! End-to-end checks of the simulator against closed-form expectations:
//! transparency of the noiseless linear link, the amplifier noise budget,
//! perturbative scaling of nonlinear interference, and input validation.

use fiberplan_core::config::parse_config;
use fiberplan_core::units::PLANCK;
use fiberplan_core::{ConstellationMoments, SystemConfig};
use fiberplan_ssfm::{simulate, SsfmError, SsfmOptions};

fn link_toml(n_channels: usize, gamma: f64, spans_km: &[f64], first_last: (usize, usize)) -> String {
    let mut toml = format!(
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
gamma = {{ value = {gamma}, unit = "1/W/km" }}
coupling = [[1.0]]

[[fiber.mode]]
name = "LP01"
attenuation = {{ value = 0.226, unit = "dB/km" }}
beta2 = {{ value = 31.86, unit = "ps^2/km" }}
beta3 = {{ value = 0.1452, unit = "ps^3/km" }}

[[amplifier]]
name = "edfa"
noise_figure = {{ value = 5.0, unit = "dB" }}
max_gain = {{ value = 30.0, unit = "dB" }}
saturation_power = {{ value = 10.0, unit = "dBm" }}

[link]
booster_gain = {{ value = 0.0, unit = "dB" }}
"#
    );
    for km in spans_km {
        toml.push_str(&format!(
            r#"
[[link.span]]
length = {{ value = {km}, unit = "km" }}
fiber = "smf"
amplifier = "edfa"
"#
        ));
    }
    let channels: Vec<String> = (1..=n_channels).map(|c| c.to_string()).collect();
    toml.push_str(&format!(
        r#"
[[lightpath]]
id = "all"
first_span = {first}
last_span = {last}
channels = [{ch}]
modes = ["LP01"]
required_snr = {{ value = 5.5, unit = "dB" }}
"#,
        first = first_last.0,
        last = first_last.1,
        ch = channels.join(", "),
    ));
    toml
}

fn config(n_channels: usize, gamma: f64, spans_km: &[f64]) -> SystemConfig {
    let last = spans_km.len();
    parse_config(&link_toml(n_channels, gamma, spans_km, (1, last))).unwrap()
}

fn transparent_gains(cfg: &SystemConfig) -> Vec<f64> {
    (0..cfg.n_spans()).map(|s| 1.0 / cfg.span_transmittance(s)).collect()
}

#[test]
fn noiseless_linear_link_is_transparent() {
    let cfg = config(2, 0.0, &[80.0, 60.0]);
    let gains = transparent_gains(&cfg);
    let powers = [1.0e-3, 2.0e-3];
    let opts = SsfmOptions { ase: false, steps_per_span: 8, ..SsfmOptions::default() };
    let out = simulate(&cfg, &powers, &gains, &opts).unwrap();
    assert_eq!(out.len(), 2);
    for (carrier, p) in out.iter().zip(powers) {
        assert!(
            carrier.snr > 1e12,
            "linear noiseless channel {} should be exact, snr {}",
            carrier.carrier.channel,
            carrier.snr
        );
        assert!((carrier.received_w - p).abs() < 1e-12 * p);
    }
    // Bitwise repeatability of the whole pipeline.
    let again = simulate(&cfg, &powers, &gains, &opts).unwrap();
    for (a, b) in out.iter().zip(&again) {
        assert_eq!(a.snr.to_bits(), b.snr.to_bits());
    }
}

#[test]
fn amplifier_noise_matches_the_analytic_budget() {
    let cfg = config(1, 0.0, &[80.0, 80.0]);
    let gains = transparent_gains(&cfg);
    let p = 1.0e-3;
    let opts = SsfmOptions { steps_per_span: 8, ..SsfmOptions::default() };
    let out = simulate(&cfg, &[p], &gains, &opts).unwrap();
    let nf = cfg.span_amplifier(0).noise_figure;
    let ase: f64 = gains
        .iter()
        .map(|g| nf * (g - 1.0) * PLANCK * cfg.plan.center_frequency * cfg.plan.bandwidth)
        .sum();
    let expect = p / ase;
    let got = out[0].snr;
    assert!(
        (got - expect).abs() < 0.05 * expect,
        "snr {got:.1} vs analytic {expect:.1}"
    );
}

// First-order perturbation: the interference field grows as p^(3/2), so
// noise-to-signal grows as p^2. Doubling the power must quarter the SNR.
#[test]
fn nonlinear_noise_scales_with_the_square_of_power() {
    let cfg = config(1, 1.3, &[80.0]);
    let gains = transparent_gains(&cfg);
    let opts = SsfmOptions { ase: false, steps_per_span: 120, ..SsfmOptions::default() };
    let low = simulate(&cfg, &[1.0e-3], &gains, &opts).unwrap()[0].snr;
    let high = simulate(&cfg, &[2.0e-3], &gains, &opts).unwrap()[0].snr;
    let ratio = low / high;
    assert!(
        (3.7..=4.3).contains(&ratio),
        "snr ratio {ratio} strays from the perturbative 4.0"
    );
}

#[test]
fn twin_runs_share_their_symbol_streams() {
    let cfg = config(1, 1.3, &[80.0]);
    let gains = transparent_gains(&cfg);
    let noisy = SsfmOptions { steps_per_span: 40, ..SsfmOptions::default() };
    let quiet = SsfmOptions { ase: false, ..noisy.clone() };
    let with_noise = simulate(&cfg, &[1.0e-3], &gains, &noisy).unwrap();
    let without = simulate(&cfg, &[1.0e-3], &gains, &quiet).unwrap();
    assert_eq!(with_noise[0].received_w.to_bits(), without[0].received_w.to_bits());
    // Amplifier noise must dominate the nonlinear residue at this power.
    assert!(with_noise[0].snr < 0.5 * without[0].snr);
}

#[test]
fn partial_lightpaths_are_rejected() {
    let cfg = parse_config(&link_toml(1, 1.3, &[80.0, 80.0], (1, 1))).unwrap();
    let gains = transparent_gains(&cfg);
    let err = simulate(&cfg, &[1.0e-3], &gains, &SsfmOptions::default()).unwrap_err();
    assert!(matches!(err, SsfmError::UnsupportedTopology { .. }), "{err}");
}

#[test]
fn shape_and_option_errors_are_reported() {
    let cfg = config(2, 1.3, &[80.0]);
    let gains = transparent_gains(&cfg);
    let opts = SsfmOptions::default();
    assert!(matches!(
        simulate(&cfg, &[1.0e-3], &gains, &opts),
        Err(SsfmError::ShapeMismatch(_))
    ));
    assert!(matches!(
        simulate(&cfg, &[1.0e-3, 1.0e-3], &[], &opts),
        Err(SsfmError::ShapeMismatch(_))
    ));
    assert!(matches!(
        simulate(&cfg, &[1.0e-3, 0.0], &gains, &opts),
        Err(SsfmError::ShapeMismatch(_))
    ));
    let few = SsfmOptions { steps_per_span: 2, ..SsfmOptions::default() };
    assert!(matches!(
        simulate(&cfg, &[1.0e-3, 1.0e-3], &gains, &few),
        Err(SsfmError::TooFewSteps { .. })
    ));
}

#[test]
fn unknown_constellations_are_rejected() {
    let mut cfg = config(1, 1.3, &[80.0]);
    cfg.constellation = ConstellationMoments::new(1.0, 1.5, 3.0);
    let gains = transparent_gains(&cfg);
    let err = simulate(&cfg, &[1.0e-3], &gains, &SsfmOptions::default()).unwrap_err();
    assert!(matches!(err, SsfmError::UnsupportedConstellation { .. }), "{err}");
}
