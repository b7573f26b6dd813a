//! Decibel and unit conversion helpers.
//!
//! Convention: `db_to_linear` / `linear_to_db` operate on power ratios,
//! `dbm_to_watts` / `watts_to_dbm` on absolute powers, and
//! `db_per_km_to_linear` maps a fibre loss figure to the power attenuation
//! coefficient `alpha` such that power decays as `exp(-alpha * z)`.

use std::f64::consts::LN_10;

/// Planck constant, J s.
pub const PLANCK: f64 = 6.62607015e-34;
/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// dB/km loss figure to power attenuation, 1/km.
pub fn db_per_km_to_linear(db_per_km: f64) -> f64 {
    db_per_km * LN_10 / 10.0
}

/// Power attenuation (1/km) back to a dB/km loss figure.
pub fn linear_to_db_per_km(alpha: f64) -> f64 {
    alpha * 10.0 / LN_10
}

/// Wavelength (m) to optical frequency (Hz).
pub fn wavelength_to_frequency(lambda_m: f64) -> f64 {
    SPEED_OF_LIGHT / lambda_m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert!((db_to_linear(6.0) - 3.9810717055349722).abs() < 1e-12);
        assert!((dbm_to_watts(25.0) - 0.31622776601683794).abs() < 1e-12);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        // 0.226 dB/km over 80 km is 18.08 dB of span loss.
        let alpha = db_per_km_to_linear(0.226);
        let trans = (-alpha * 80.0).exp();
        assert!((trans - 10f64.powf(-1.808)).abs() < 1e-12);
        assert!((trans - 0.015560).abs() < 5e-7);
    }

    #[test]
    fn fundamental_mode_frequency() {
        let nu = wavelength_to_frequency(1550e-9);
        assert!((nu - 1.9341448903225806e14).abs() / nu < 1e-12);
    }

    proptest! {
        #[test]
        fn db_round_trip(db in -80.0f64..80.0) {
            let back = linear_to_db(db_to_linear(db));
            prop_assert!((back - db).abs() < 1e-12);
        }

        #[test]
        fn dbm_round_trip(dbm in -60.0f64..40.0) {
            let back = watts_to_dbm(dbm_to_watts(dbm));
            prop_assert!((back - dbm).abs() < 1e-12);
        }

        #[test]
        fn attenuation_round_trip(db_km in 0.01f64..2.0) {
            let back = linear_to_db_per_km(db_per_km_to_linear(db_km));
            prop_assert!((back - db_km).abs() < 1e-12);
        }
    }
}
