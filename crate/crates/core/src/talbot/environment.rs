//! Reduction factors R_n of environmental decoherence and the shipped channel presets.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::constants::{ATOMIC_MASS_UNIT, BOLTZMANN, HBAR, PLANCK, SPEED_OF_LIGHT};
use crate::model::{DecoherenceChannel, Resolution};

/// Mass of a nitrogen molecule, the default residual-gas species.
pub const NITROGEN_MASS: f64 = 28.0 * ATOMIC_MASS_UNIT;

const ZETA_7: f64 = 1.008_349_277_381_922_8;
const ZETA_9: f64 = 1.002_008_392_826_082_2;

/// R_n = exp{-Gamma [1 - f(n h t2 / (m D))] (t1 + t2)} for one channel.
pub fn environmental_reduction(
    channel: &DecoherenceChannel,
    n: i64,
    t1: f64,
    t2: f64,
    fringe_period: f64,
    mass: f64,
) -> Result<f64> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::domain(format!("flight times must be positive (got {t1}, {t2})")));
    }
    if channel.rate == 0.0 {
        return Ok(1.0);
    }
    let x = (n as f64 * PLANCK * t2 / (mass * fringe_period)).abs();
    let f = channel.resolution.eval(x);
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Invariant(format!("resolution function of '{}' returned {f} at x = {x:e}", channel.name)));
    }
    if n == 0 && f != 1.0 {
        return Err(Error::Invariant(format!(
            "resolution function of '{}' is not normalized: f(0) = {f}",
            channel.name
        )));
    }
    Ok((-channel.rate * (1.0 - f) * (t1 + t2)).exp())
}

/// Product of the reduction factors of all channels.
pub fn combined_reduction(
    channels: &[DecoherenceChannel],
    n: i64,
    t1: f64,
    t2: f64,
    fringe_period: f64,
    mass: f64,
) -> Result<f64> {
    channels.iter().try_fold(1.0, |acc, c| Ok(acc * environmental_reduction(c, n, t1, t2, fringe_period, mass)?))
}

/// Residual-gas collisions at the geometric cross-section pi R^2, each collision resolving the
/// paths completely.
pub fn gas_collision_channel(pressure: f64, temperature: f64, radius: f64, gas_mass: f64) -> DecoherenceChannel {
    let rate = if pressure > 0.0 && temperature > 0.0 {
        let density = pressure / (BOLTZMANN * temperature);
        let mean_speed = (8.0 * BOLTZMANN * temperature / (PI * gas_mass)).sqrt();
        density * PI * radius * radius * mean_speed
    } else {
        0.0
    };
    DecoherenceChannel {
        name: "gas collisions".into(),
        rate,
        resolution: Resolution::Complete,
        provenance: format!(
            "hard-sphere rate n_gas pi R^2 v_mean at p = {pressure:e} Pa, T = {temperature} K, gas mass {gas_mass:e} kg"
        ),
    }
}

/// Rayleigh scattering of thermal photons, with a Gaussian resolution whose short-distance
/// curvature reproduces the localization rate of the thermal spectrum.
pub fn blackbody_scattering_channel(temperature: f64, radius: f64, clausius_mossotti_real: f64) -> DecoherenceChannel {
    let (rate, length) = if temperature > 0.0 {
        let kt = BOLTZMANN * temperature / (HBAR * SPEED_OF_LIGHT);
        let r6cm2 = radius.powi(6) * clausius_mossotti_real * clausius_mossotti_real;
        let rate = SPEED_OF_LIGHT * 8.0 / (3.0 * PI) * r6cm2 * 720.0 * ZETA_7 * kt.powi(7);
        let localization = 40320.0 * 8.0 * ZETA_9 * SPEED_OF_LIGHT / (9.0 * PI) * r6cm2 * kt.powi(9);
        (rate, (rate / (2.0 * localization)).sqrt())
    } else {
        (0.0, f64::INFINITY)
    };
    DecoherenceChannel {
        name: "blackbody scattering".into(),
        rate,
        resolution: Resolution::Gaussian { length },
        provenance: format!(
            "thermal Rayleigh scattering at T = {temperature} K; Gaussian resolution, length {length:e} m"
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const M: f64 = 1e8 * ATOMIC_MASS_UNIT;

    #[test]
    fn zero_rate_is_identity() {
        let c = DecoherenceChannel::new("none", 0.0, Resolution::Complete);
        assert_eq!(environmental_reduction(&c, 3, 0.07, 0.07, 2e-7, M).unwrap(), 1.0);
    }

    #[test]
    fn zeroth_order_is_untouched() {
        let c = DecoherenceChannel::new("gas", 5.0, Resolution::Complete);
        assert_eq!(environmental_reduction(&c, 0, 0.07, 0.07, 2e-7, M).unwrap(), 1.0);
    }

    #[test]
    fn complete_resolution_gives_exponential() {
        let c = DecoherenceChannel::new("gas", 1.0 / 0.3, Resolution::Complete);
        let r = environmental_reduction(&c, 2, 0.1, 0.2, 2e-7, M).unwrap();
        assert!((r - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bad_resolution_function_is_an_error() {
        let c = DecoherenceChannel::new("bad", 1.0, Resolution::Custom(std::sync::Arc::new(|_| 1.5)));
        assert!(matches!(environmental_reduction(&c, 1, 0.1, 0.1, 2e-7, M), Err(Error::Invariant(_))));
    }

    #[test]
    fn gas_rate_matches_kinetic_estimate() {
        // 1e-10 mbar = 1e-8 Pa
        let c = gas_collision_channel(1e-8, 300.0, 27.8e-9, NITROGEN_MASS);
        let n = 1e-8 / (BOLTZMANN * 300.0);
        let v = (8.0 * BOLTZMANN * 300.0 / (PI * NITROGEN_MASS)).sqrt();
        assert!((c.rate - n * PI * 27.8e-9f64.powi(2) * v).abs() < 1e-12 * c.rate);
        assert!(c.rate > 1.0 && c.rate < 5.0);
    }

    #[test]
    fn blackbody_resolution_curvature() {
        let c = blackbody_scattering_channel(300.0, 27.8e-9, 0.3186);
        let Resolution::Gaussian { length } = c.resolution else { panic!() };
        // length is a fixed fraction of the thermal photon wavelength hbar c / kT
        let ratio = length * BOLTZMANN * 300.0 / (HBAR * SPEED_OF_LIGHT);
        assert!((ratio - 0.1642).abs() < 1e-3, "{ratio}");
        assert!(blackbody_scattering_channel(0.0, 27.8e-9, 0.3186).rate == 0.0);
    }

    proptest! {
        #[test]
        fn reduction_lies_in_unit_interval(rate in 0.0..50.0f64, n in -200i64..200, t in 0.001..0.5f64, len in 1e-9..1e-5f64) {
            for res in [Resolution::Complete, Resolution::Gaussian { length: len }] {
                let c = DecoherenceChannel::new("c", rate, res);
                let r = environmental_reduction(&c, n, t, t, 2.13e-7, M).unwrap();
                prop_assert!(r > 0.0 && r <= 1.0);
                if n == 0 { prop_assert_eq!(r, 1.0); }
            }
        }
    }
}
