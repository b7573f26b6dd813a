//! Content fingerprint of a [`SystemConfig`].
//!
//! The fingerprint is a SHA-256 digest over a canonical byte encoding of the
//! parsed, unit-converted configuration. Two config files that parse to the
//! same physics (regardless of key order, comments or unit spellings) share a
//! fingerprint, which keys the on-disk tensor cache.

use sha2::{Digest, Sha256};

use crate::types::SystemConfig;

/// 32-byte configuration digest.
pub fn config_fingerprint(cfg: &SystemConfig) -> [u8; 32] {
    let mut w = Writer::default();
    encode(cfg, &mut w);
    let mut hasher = Sha256::new();
    hasher.update(&w.buf);
    hasher.finalize().into()
}

/// Hex form, for logs and cache metadata.
pub fn fingerprint_hex(cfg: &SystemConfig) -> String {
    config_fingerprint(cfg).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn f64(&mut self, v: f64) {
        // Canonicalise the zero sign so -0.0 and 0.0 hash alike.
        let v = if v == 0.0 { 0.0 } else { v };
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn tag(&mut self, t: &str) {
        self.str(t);
    }
}

fn encode(cfg: &SystemConfig, w: &mut Writer) {
    w.tag("fiberplan-config-v1");

    w.tag("plan");
    w.usize(cfg.plan.n_channels);
    w.f64(cfg.plan.symbol_rate);
    w.f64(cfg.plan.bandwidth);
    w.f64(cfg.plan.spacing);
    w.f64(cfg.plan.center_frequency);

    w.tag("fibers");
    w.usize(cfg.fibers.len());
    for f in &cfg.fibers {
        w.str(&f.name);
        w.f64(f.gamma);
        w.usize(f.modes.len());
        for m in &f.modes {
            w.str(&m.name);
            w.f64(m.attenuation);
            w.f64(m.beta0);
            w.f64(m.beta1);
            w.f64(m.beta2);
            w.f64(m.beta3);
        }
        for row in &f.coupling {
            for &v in row {
                w.f64(v);
            }
        }
    }

    w.tag("amplifiers");
    w.usize(cfg.amplifiers.len());
    for a in &cfg.amplifiers {
        w.str(&a.name);
        w.f64(a.noise_figure);
        w.f64(a.max_gain);
        w.f64(a.saturation_power);
    }

    w.tag("link");
    w.usize(cfg.link.spans.len());
    for s in &cfg.link.spans {
        w.f64(s.length_km);
        w.usize(s.fiber);
        w.usize(s.amplifier);
    }
    w.f64(cfg.link.booster_gain);
    w.usize(cfg.link.nodes.len());
    for n in &cfg.link.nodes {
        w.str(n);
    }
    w.usize(cfg.link.lightpaths.len());
    for lp in &cfg.link.lightpaths {
        w.str(&lp.id);
        w.usize(lp.first_span);
        w.usize(lp.last_span);
        w.usize(lp.carriers.len());
        for &(ch, mode) in &lp.carriers {
            w.usize(ch);
            w.usize(mode);
        }
        w.f64(lp.required_snr);
    }

    w.tag("rx");
    w.f64(cfg.receiver_noise);

    w.tag("constellation");
    w.f64(cfg.constellation.mu2);
    w.f64(cfg.constellation.mu4);
    w.f64(cfg.constellation.mu6);
    w.str(match cfg.kappa_convention {
        crate::moments::KappaConvention::GaussianReducing => "gaussian-reducing",
        crate::moments::KappaConvention::Paper => "legacy",
    });

    w.tag("solver");
    w.u64(u64::from(cfg.solver.quad_points_per_band));
    w.f64(cfg.solver.bisection_epsilon);
    w.usize(cfg.solver.max_outer_iterations);
    w.f64(cfg.solver.dual_step);
    w.u64(u64::from(cfg.solver.relax_saturation));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{
        AmplifierSpec, ChannelPlan, FiberSpec, Lightpath, LinkTopology, ModeSpec, SolverKnobs,
        SpanSpec, SystemConfig,
    };
    use crate::moments::{ConstellationMoments, KappaConvention};

    fn minimal() -> SystemConfig {
        let mode = ModeSpec {
            name: "LP01".into(),
            attenuation: 0.052,
            beta0: 0.0,
            beta1: 0.0,
            beta2: 21.7e-24,
            beta3: 0.0,
        };
        SystemConfig {
            plan: ChannelPlan {
                n_channels: 1,
                symbol_rate: 32e9,
                bandwidth: 32e9,
                spacing: 50e9,
                center_frequency: 1.934e14,
            },
            fibers: vec![FiberSpec::new("smf", 1.3, vec![mode], vec![vec![1.0]]).unwrap()],
            amplifiers: vec![AmplifierSpec {
                name: "edfa".into(),
                noise_figure: 4.0,
                max_gain: 1000.0,
                saturation_power: 0.3,
            }],
            link: LinkTopology {
                spans: vec![SpanSpec { length_km: 80.0, fiber: 0, amplifier: 0 }],
                booster_gain: 100.0,
                nodes: vec![],
                lightpaths: vec![Lightpath {
                    id: "L1".into(),
                    first_span: 0,
                    last_span: 0,
                    carriers: vec![(0, 0)],
                    required_snr: 3.5,
                }],
            },
            receiver_noise: 1.6e-6,
            constellation: ConstellationMoments::psk(),
            kappa_convention: KappaConvention::GaussianReducing,
            solver: SolverKnobs::default(),
        }
    }

    #[test]
    fn fingerprint_is_stable_for_clones() {
        let a = minimal();
        let b = a.clone();
        assert_eq!(config_fingerprint(&a), config_fingerprint(&b));
    }

    #[test]
    fn fingerprint_tracks_physics_changes() {
        let a = minimal();
        let mut b = a.clone();
        b.fibers[0].gamma = 1.4;
        assert_ne!(config_fingerprint(&a), config_fingerprint(&b));

        let mut c = a.clone();
        c.solver.quad_points_per_band = 64;
        assert_ne!(config_fingerprint(&a), config_fingerprint(&c));
    }

    #[test]
    fn negative_zero_hashes_like_zero() {
        let a = minimal();
        let mut b = a.clone();
        b.fibers[0].modes[0].beta0 = -0.0;
        assert_eq!(config_fingerprint(&a), config_fingerprint(&b));
    }

    #[test]
    fn hex_digest_is_64_chars() {
        assert_eq!(fingerprint_hex(&minimal()).len(), 64);
    }
}
