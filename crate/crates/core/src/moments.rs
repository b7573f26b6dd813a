//! Constellation moment statistics and the derived cumulants that weight the
//! non-Gaussian interference corrections.
//!
//! Moments are of the normalised complex symbol `z` with `E[|z|^2] = 1`:
//! `mu2 = E[|z|^2]`, `mu4 = E[|z|^4]`, `mu6 = E[|z|^6]`. The cumulants are
//!
//! ```text
//! k1 = mu2
//! k2 = mu4 - 2 mu2^2
//! k3 = mu6 - c mu4 mu2 + 12 mu2^3
//! ```
//!
//! with `c = 9` under [`KappaConvention::GaussianReducing`] (all three
//! third-order terms of the circular-Gaussian reduction retained, so a
//! circular Gaussian constellation yields `k2 = k3 = 0`) and `c = 4` under
//! [`KappaConvention::Paper`] (a published variant that does not vanish for
//! Gaussian input). Gaussian-reducing is the default.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Sixth-order moment description of a (normalised) symbol constellation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstellationMoments {
    pub mu2: f64,
    pub mu4: f64,
    pub mu6: f64,
}

impl ConstellationMoments {
    pub fn new(mu2: f64, mu4: f64, mu6: f64) -> Self {
        Self { mu2, mu4, mu6 }
    }

    /// Any unit-modulus constellation: PSK of arbitrary order.
    pub fn psk() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }

    /// Circular complex Gaussian with unit power.
    pub fn gaussian() -> Self {
        Self::new(1.0, 2.0, 6.0)
    }

    /// Square 16-QAM, unit average power. Moments are exact rationals:
    /// mu4 = 33/25, mu6 = 49/25.
    pub fn qam16() -> Self {
        Self::new(1.0, 1.32, 1.96)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.mu2.is_finite() && self.mu4.is_finite() && self.mu6.is_finite()) {
            return Err(ConfigError::validation("constellation moments must be finite"));
        }
        if (self.mu2 - 1.0).abs() > 1e-9 {
            return Err(ConfigError::validation(format!(
                "constellation must be normalised to unit power (mu2 = {})",
                self.mu2
            )));
        }
        // |z|^4 >= (|z|^2)^2 by Jensen; equality only for constant modulus.
        if self.mu4 < self.mu2 * self.mu2 - 1e-12 {
            return Err(ConfigError::validation("mu4 < mu2^2 violates Jensen's inequality"));
        }
        if self.mu6 <= 0.0 {
            return Err(ConfigError::validation("mu6 must be positive"));
        }
        Ok(())
    }

    pub fn cumulants(&self, convention: KappaConvention) -> Cumulants {
        let c = match convention {
            KappaConvention::GaussianReducing => 9.0,
            KappaConvention::Paper => 4.0,
        };
        Cumulants {
            k1: self.mu2,
            k2: self.mu4 - 2.0 * self.mu2 * self.mu2,
            k3: self.mu6 - c * self.mu4 * self.mu2 + 12.0 * self.mu2.powi(3),
        }
    }
}

/// Which third-order cumulant formula to apply; see module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaConvention {
    #[default]
    GaussianReducing,
    Paper,
}

/// Second, fourth and sixth order cumulants of the symbol modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cumulants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: enumerate a constellation and average |z|^(2n).
    fn moments_of(points: &[(f64, f64)]) -> ConstellationMoments {
        let n = points.len() as f64;
        let p2: f64 = points.iter().map(|(re, im)| re * re + im * im).sum::<f64>() / n;
        let scale = p2.sqrt();
        let (mut m2, mut m4, mut m6) = (0.0, 0.0, 0.0);
        for (re, im) in points {
            let a2 = (re / scale).powi(2) + (im / scale).powi(2);
            m2 += a2;
            m4 += a2 * a2;
            m6 += a2 * a2 * a2;
        }
        ConstellationMoments::new(m2 / n, m4 / n, m6 / n)
    }

    #[test]
    fn qam16_moments_match_enumeration() {
        let mut pts = Vec::new();
        for re in [-3.0, -1.0, 1.0, 3.0] {
            for im in [-3.0, -1.0, 1.0, 3.0] {
                pts.push((re, im));
            }
        }
        let m = moments_of(&pts);
        let preset = ConstellationMoments::qam16();
        assert!((m.mu2 - preset.mu2).abs() < 1e-12);
        assert!((m.mu4 - preset.mu4).abs() < 1e-12);
        assert!((m.mu6 - preset.mu6).abs() < 1e-12);
    }

    #[test]
    fn qpsk_cumulants() {
        let m = ConstellationMoments::psk();
        let k = m.cumulants(KappaConvention::GaussianReducing);
        assert_eq!((k.k1, k.k2, k.k3), (1.0, -1.0, 4.0));
        let k = m.cumulants(KappaConvention::Paper);
        assert_eq!((k.k1, k.k2, k.k3), (1.0, -1.0, 9.0));
    }

    #[test]
    fn gaussian_cumulants_vanish_under_gaussian_reducing() {
        let k = ConstellationMoments::gaussian().cumulants(KappaConvention::GaussianReducing);
        assert_eq!((k.k1, k.k2, k.k3), (1.0, 0.0, 0.0));
        // The published variant does not reduce Gaussian input.
        let k = ConstellationMoments::gaussian().cumulants(KappaConvention::Paper);
        assert!((k.k3 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn qam16_cumulants() {
        let k = ConstellationMoments::qam16().cumulants(KappaConvention::GaussianReducing);
        assert!((k.k1 - 1.0).abs() < 1e-12);
        assert!((k.k2 + 0.68).abs() < 1e-12);
        assert!((k.k3 - 2.08).abs() < 1e-12);
    }

    #[test]
    fn scaled_gaussian_still_reduces() {
        // A Gaussian stays Gaussian when the sixth-moment chain is scaled
        // consistently; only unit-power inputs pass validation though.
        let m = ConstellationMoments::gaussian();
        m.validate().unwrap();
        let bad = ConstellationMoments::new(2.0, 8.0, 48.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn invalid_moments_rejected() {
        assert!(ConstellationMoments::new(1.0, 0.5, 1.0).validate().is_err());
        assert!(ConstellationMoments::new(1.0, 1.0, -1.0).validate().is_err());
        assert!(ConstellationMoments::new(1.0, f64::NAN, 1.0).validate().is_err());
    }
}
