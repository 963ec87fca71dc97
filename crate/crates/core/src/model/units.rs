//! Dimension bookkeeping for the formulas used across the crate.
//!
//! A [`Dim`] carries integer exponents of the SI base units that occur here.
//! It is only used to audit formulas in tests; runtime values stay plain `f64`.

use std::ops::{Div, Mul};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dim {
    pub kg: i8,
    pub m: i8,
    pub s: i8,
    pub a: i8,
    pub k: i8,
}

impl Dim {
    pub const fn new(kg: i8, m: i8, s: i8, a: i8, k: i8) -> Self {
        Dim { kg, m, s, a, k }
    }

    pub fn powi(self, n: i8) -> Self {
        Dim::new(self.kg * n, self.m * n, self.s * n, self.a * n, self.k * n)
    }

    /// Square root; panics if any exponent is odd.
    pub fn sqrt(self) -> Self {
        let half = |e: i8| {
            assert!(e % 2 == 0, "sqrt of dimension with odd exponent");
            e / 2
        };
        Dim::new(half(self.kg), half(self.m), half(self.s), half(self.a), half(self.k))
    }
}

impl Mul for Dim {
    type Output = Dim;
    fn mul(self, o: Dim) -> Dim {
        Dim::new(self.kg + o.kg, self.m + o.m, self.s + o.s, self.a + o.a, self.k + o.k)
    }
}

impl Div for Dim {
    type Output = Dim;
    fn div(self, o: Dim) -> Dim {
        Dim::new(self.kg - o.kg, self.m - o.m, self.s - o.s, self.a - o.a, self.k - o.k)
    }
}

pub const ONE: Dim = Dim::new(0, 0, 0, 0, 0);
pub const KG: Dim = Dim::new(1, 0, 0, 0, 0);
pub const M: Dim = Dim::new(0, 1, 0, 0, 0);
pub const S: Dim = Dim::new(0, 0, 1, 0, 0);
pub const KELVIN: Dim = Dim::new(0, 0, 0, 0, 1);
pub const HZ: Dim = Dim::new(0, 0, -1, 0, 0);
pub const N: Dim = Dim::new(1, 1, -2, 0, 0);
pub const J: Dim = Dim::new(1, 2, -2, 0, 0);
pub const W: Dim = Dim::new(1, 2, -3, 0, 0);
pub const V: Dim = Dim::new(1, 2, -3, -1, 0);
pub const C: Dim = Dim::new(0, 0, 1, 1, 0);

pub const PLANCK: Dim = Dim::new(1, 2, -1, 0, 0);
pub const BOLTZMANN: Dim = Dim::new(1, 2, -2, 0, -1);
pub const SPEED: Dim = Dim::new(0, 1, -1, 0, 0);
pub const PERMITTIVITY: Dim = Dim::new(-1, -3, 4, 2, 0);
pub const ACCEL: Dim = Dim::new(0, 1, -2, 0, 0);

/// Polarizability, C m^2 V^-1.
pub fn polarizability() -> Dim {
    C * M.powi(2) / V
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarizability_is_eps0_volume() {
        assert_eq!(polarizability(), PERMITTIVITY * M.powi(3));
    }

    #[test]
    fn radius_from_mass_density() {
        let density = KG / M.powi(3);
        // (m / rho)^(1/3)
        assert_eq!(KG / density, M.powi(3));
    }

    #[test]
    fn talbot_time_is_a_time() {
        assert_eq!(KG * M.powi(2) / PLANCK, S);
    }

    #[test]
    fn thermal_widths() {
        let sx2 = BOLTZMANN * KELVIN / (KG * HZ.powi(2));
        assert_eq!(sx2.sqrt(), M);
        let sp2 = KG * BOLTZMANN * KELVIN;
        assert_eq!(sp2.sqrt(), KG * SPEED);
    }

    #[test]
    fn phase_modulation_is_dimensionless() {
        // 2 Re(alpha) E_G / (hbar c eps0 a_G)
        let rayleigh = polarizability() * J / (PLANCK * SPEED * PERMITTIVITY * M.powi(2));
        assert_eq!(rayleigh, ONE);
        // 8 F0 E_G / (hbar c eps0 a_G k E0^2)
        let field = V / M;
        let mie = N * J / (PLANCK * SPEED * PERMITTIVITY * M.powi(2) / M * field.powi(2));
        assert_eq!(mie, ONE);
    }

    #[test]
    fn dipole_force_amplitude() {
        // Re(alpha) k E0^2 / 4
        assert_eq!(polarizability() / M * (V / M).powi(2), N);
    }

    #[test]
    fn fringe_density_normalization() {
        // m / (sigma_p (t1 + t2)) is an inverse length
        assert_eq!(KG / (KG * SPEED * S), ONE / M);
        // n h t2 / (m D) is a length
        assert_eq!(PLANCK * S / (KG * M), M);
    }

    #[test]
    fn recapture_formulas() {
        let intensity = W / M.powi(2);
        // U = Re(alpha) I / (2 c eps0)
        assert_eq!(polarizability() * intensity / (SPEED * PERMITTIVITY), J);
        // v_max = sqrt(2 F d / m)
        assert_eq!((N * M / KG).sqrt(), SPEED);
        // x = 2 v t, t = sqrt(2 h / g)
        assert_eq!(SPEED * (M / ACCEL).sqrt(), M);
        // T = m v^2 / kB
        assert_eq!(KG * SPEED.powi(2) / BOLTZMANN, KELVIN);
        // T_gs = hbar omega / kB
        assert_eq!(PLANCK * HZ / BOLTZMANN, KELVIN);
        // scattering force sigma I / c
        assert_eq!(M.powi(2) * intensity / SPEED, N);
    }

    #[test]
    fn environmental_reduction_exponent() {
        // Gamma (t1 + t2)
        assert_eq!(HZ * S, ONE);
    }
}
