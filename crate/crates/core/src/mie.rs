//! Sphere scattering: the Mie series, the standing-wave force amplitude, the
//! finite-size phase modulation and the decoherence kernel of grating photons.
//!
//! Time convention is exp(-i omega t) throughout, so outgoing waves use h_n^(1).

mod decoherence;
mod force;

pub use decoherence::{
    absorption_reduction, mean_absorbed_photons, mean_scattered_photons, scattering_reduction,
    GratingDecoherenceKernel, DEFAULT_THETA_NODES,
};
pub use force::{
    force_sign_change, grating_force_amplitude, phase_modulation, plane_wave_force, pulse_energy_for_phase,
    standing_wave_force, unit_force_at, PhaseModulation, Regime, RAYLEIGH_LIMIT,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ParticleSpec;
use crate::special::spherical::{log_derivative, spherical_j, spherical_y};

/// Largest size parameter the series is trusted for.
pub const MAX_SIZE_PARAMETER: f64 = 100.0;

/// Truncation order of the series: ceil(x + 4 x^(1/3) + 2).
pub fn series_order(x: f64) -> usize {
    (x + 4.0 * x.cbrt() + 2.0).ceil() as usize
}

/// Mie coefficients a_n, b_n for n = 1..=n_max (stored at index n - 1).
#[derive(Debug, Clone, Serialize)]
pub struct MieSolution {
    pub size_parameter: f64,
    pub refractive_index: Complex64,
    pub wavelength: f64,
    pub radius: f64,
    pub n_max: usize,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

pub fn mie_solve(particle: &ParticleSpec, wavelength: f64) -> Result<MieSolution> {
    solve_sphere(particle.radius, particle.refractive_index, wavelength, None)
}

/// Series for a bare sphere; `order` overrides the default truncation.
pub fn solve_sphere(
    radius: f64,
    refractive_index: Complex64,
    wavelength: f64,
    order: Option<usize>,
) -> Result<MieSolution> {
    if !(radius > 0.0) || !(wavelength > 0.0) {
        return Err(Error::domain(format!("radius and wavelength must be positive (got {radius}, {wavelength})")));
    }
    let x = 2.0 * PI * radius / wavelength;
    if x > MAX_SIZE_PARAMETER {
        return Err(Error::Unsupported(format!("size parameter {x:.3} exceeds {MAX_SIZE_PARAMETER}")));
    }
    let m = refractive_index;
    let n_max = order.unwrap_or_else(|| series_order(x)).max(1);
    let d = log_derivative(n_max, m * x);
    let j = spherical_j(n_max, x);
    let y = spherical_y(n_max, x);
    let psi = |n: usize| x * j[n];
    let xi = |n: usize| Complex64::new(x * j[n], x * y[n]);

    let mut a = Vec::with_capacity(n_max);
    let mut b = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let nx = n as f64 / x;
        let da = d[n] / m + nx;
        let db = d[n] * m + nx;
        let an = (da * psi(n) - psi(n - 1)) / (da * xi(n) - xi(n - 1));
        let bn = (db * psi(n) - psi(n - 1)) / (db * xi(n) - xi(n - 1));
        if !(an.is_finite() && bn.is_finite()) {
            return Err(Error::numerical(format!("non-finite Mie coefficient at order {n}")));
        }
        a.push(an);
        b.push(bn);
    }
    Ok(MieSolution { size_parameter: x, refractive_index: m, wavelength, radius, n_max, a, b })
}

impl MieSolution {
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    fn geometric(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn extinction_efficiency(&self) -> f64 {
        let s: f64 = self.orders().map(|(n, a, b)| (2 * n + 1) as f64 * (a + b).re).sum();
        2.0 * s / (self.size_parameter * self.size_parameter)
    }

    pub fn scattering_efficiency(&self) -> f64 {
        let s: f64 = self.orders().map(|(n, a, b)| (2 * n + 1) as f64 * (a.norm_sqr() + b.norm_sqr())).sum();
        2.0 * s / (self.size_parameter * self.size_parameter)
    }

    pub fn absorption_efficiency(&self) -> f64 {
        (self.extinction_efficiency() - self.scattering_efficiency()).max(0.0)
    }

    /// g Q_sca, the asymmetry-weighted scattering efficiency.
    pub fn asymmetry_efficiency(&self) -> f64 {
        let mut s = 0.0;
        for n in 1..=self.n_max {
            let (an, bn) = (self.a[n - 1], self.b[n - 1]);
            let nf = n as f64;
            if n < self.n_max {
                let (an1, bn1) = (self.a[n], self.b[n]);
                s += nf * (nf + 2.0) / (nf + 1.0) * (an * an1.conj() + bn * bn1.conj()).re;
            }
            s += (2.0 * nf + 1.0) / (nf * (nf + 1.0)) * (an * bn.conj()).re;
        }
        4.0 * s / (self.size_parameter * self.size_parameter)
    }

    pub fn extinction_cross_section(&self) -> f64 {
        self.extinction_efficiency() * self.geometric()
    }

    pub fn scattering_cross_section(&self) -> f64 {
        self.scattering_efficiency() * self.geometric()
    }

    pub fn absorption_cross_section(&self) -> f64 {
        self.absorption_efficiency() * self.geometric()
    }

    /// Radiation-pressure cross-section C_ext - g C_sca.
    pub fn radiation_pressure_cross_section(&self) -> f64 {
        (self.extinction_efficiency() - self.asymmetry_efficiency()) * self.geometric()
    }

    /// Amplitude functions (S1, S2) at mu = cos(theta).
    pub fn amplitudes(&self, mu: f64) -> (Complex64, Complex64) {
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        let (pi_n, tau_n) = angular_functions(self.n_max, mu);
        for n in 1..=self.n_max {
            let c = (2 * n + 1) as f64 / (n * (n + 1)) as f64;
            let (an, bn) = (self.a[n - 1], self.b[n - 1]);
            s1 += c * (an * pi_n[n] + bn * tau_n[n]);
            s2 += c * (an * tau_n[n] + bn * pi_n[n]);
        }
        (s1, s2)
    }

    fn orders(&self) -> impl Iterator<Item = (usize, Complex64, Complex64)> + '_ {
        (1..=self.n_max).map(move |n| (n, self.a[n - 1], self.b[n - 1]))
    }
}

/// Angular functions pi_n(mu) and tau_n(mu) for n = 0..=n_max (index 0 unused, zero).
pub fn angular_functions(n_max: usize, mu: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n_max + 1];
    let mut t = vec![0.0; n_max + 1];
    if n_max >= 1 {
        p[1] = 1.0;
        t[1] = mu;
    }
    for n in 2..=n_max {
        let nf = n as f64;
        p[n] = (2.0 * nf - 1.0) / (nf - 1.0) * mu * p[n - 1] - nf / (nf - 1.0) * p[n - 2];
        t[n] = nf * mu * p[n] - (nf + 1.0) * p[n - 1];
    }
    (p, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{integrate, quadrature::DEFAULT_TOLERANCE};

    const LAMBDA: f64 = 213e-9;

    fn radius_for(x: f64) -> f64 {
        x * LAMBDA / (2.0 * PI)
    }

    #[test]
    fn dipole_limit_of_a1() {
        let x = 1e-4;
        let m = Complex64::new(1.5, 0.0);
        let sol = solve_sphere(radius_for(x), m, LAMBDA, None).unwrap();
        let m2 = m * m;
        let expected = Complex64::new(0.0, -2.0 / 3.0) * x.powi(3) * (m2 - 1.0) / (m2 + 2.0);
        assert!(((sol.a[0] - expected) / expected).norm() < 1e-6);
        assert!(sol.b[0].norm() < 1e-3 * sol.a[0].norm());
    }

    #[test]
    fn energy_conservation_without_absorption() {
        for &x in &[0.05, 0.83, 3.0, 20.0] {
            let sol = solve_sphere(radius_for(x), Complex64::new(1.54, 0.0), LAMBDA, None).unwrap();
            let (e, s) = (sol.extinction_efficiency(), sol.scattering_efficiency());
            assert!(((e - s) / e).abs() < 1e-10, "x={x}: {e} vs {s}");
            for n in 0..sol.n_max {
                assert!(sol.a[n].norm() <= 1.0 + 1e-12 && sol.b[n].norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn absorbing_sphere_has_positive_absorption() {
        let sol = solve_sphere(radius_for(0.83), Complex64::new(1.54, 0.05), LAMBDA, None).unwrap();
        assert!(sol.absorption_efficiency() > 0.0);
    }

    #[test]
    fn series_order_rule() {
        assert_eq!(series_order(0.83), (0.83 + 4.0 * 0.83f64.cbrt() + 2.0).ceil() as usize);
        let sol = solve_sphere(radius_for(10.0), Complex64::new(1.5, 0.0), LAMBDA, None).unwrap();
        assert!(sol.n_max >= series_order(10.0));
    }

    #[test]
    fn oversized_sphere_is_rejected() {
        let err = solve_sphere(radius_for(150.0), Complex64::new(1.5, 0.0), LAMBDA, None);
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn optical_theorem() {
        for &(x, k) in &[(0.3, 0.0), (0.83, 0.0), (2.5, 0.01), (12.0, 0.0)] {
            let sol = solve_sphere(radius_for(x), Complex64::new(1.54, k), LAMBDA, None).unwrap();
            let (s1, s2) = sol.amplitudes(1.0);
            assert!((s1 - s2).norm() < 1e-12 * s1.norm());
            let q = 4.0 / (x * x) * s1.re;
            assert!(((q - sol.extinction_efficiency()) / q).abs() < 1e-8);
        }
    }

    #[test]
    fn rayleigh_angular_pattern() {
        let sol = solve_sphere(radius_for(1e-3), Complex64::new(1.54, 0.0), LAMBDA, None).unwrap();
        let (s1_0, _) = sol.amplitudes(1.0);
        for &mu in &[0.7, 0.0, -0.4, -1.0] {
            let (s1, s2) = sol.amplitudes(mu);
            assert!(((s1 - s1_0) / s1_0).norm() < 1e-5);
            assert!((s2 - s1_0 * mu).norm() < 1e-5 * s1_0.norm());
        }
    }

    #[test]
    fn asymmetry_matches_angular_integral() {
        let sol = solve_sphere(radius_for(1.7), Complex64::new(1.54, 0.0), LAMBDA, None).unwrap();
        let x = sol.size_parameter;
        let g = integrate(
            |mu| {
                let (s1, s2) = sol.amplitudes(mu);
                mu * (s1.norm_sqr() + s2.norm_sqr())
            },
            -1.0,
            1.0,
            1e-12,
        )
        .unwrap()
        .value;
        let q = g / (x * x);
        assert!(((q - sol.asymmetry_efficiency()) / q).abs() < 1e-9);
    }

    #[test]
    fn adaptive_integral_of_angular_intensity_matches_trapezoid() {
        let sol = solve_sphere(radius_for(0.83), Complex64::new(1.54, 0.0), LAMBDA, None).unwrap();
        let f = |mu: f64| {
            let (s1, s2) = sol.amplitudes(mu);
            0.5 * (s1.norm_sqr() + s2.norm_sqr())
        };
        let adaptive = integrate(f, -1.0, 1.0, DEFAULT_TOLERANCE).unwrap().value;
        let n = 1_000_000;
        let h = 2.0 / n as f64;
        let mut trap = 0.5 * (f(-1.0) + f(1.0));
        for i in 1..n {
            trap += f(-1.0 + i as f64 * h);
        }
        trap *= h;
        assert!((adaptive - trap).abs() < 1e-8 * adaptive.abs().max(1.0));
        let x = sol.size_parameter;
        let q = 2.0 / (x * x) * adaptive;
        assert!(((q - sol.scattering_efficiency()) / q).abs() < 1e-9);
    }

    /// Compensated (double-double) accumulator.
    #[derive(Default)]
    struct DoubleDouble {
        hi: f64,
        lo: f64,
    }

    impl DoubleDouble {
        fn add(&mut self, v: f64) {
            let s = self.hi + v;
            let bp = s - self.hi;
            let err = (self.hi - (s - bp)) + (v - bp);
            self.hi = s;
            self.lo += err;
        }
        fn value(&self) -> f64 {
            self.hi + self.lo
        }
    }

    /// Complex psi_n(z) = z j_n(z) by downward recurrence, independent of the log-derivative route.
    fn psi_complex(n_max: usize, z: Complex64) -> Vec<Complex64> {
        let start = n_max + 40;
        let mut out = vec![Complex64::new(0.0, 0.0); n_max + 2];
        let (mut above, mut cur) = (Complex64::new(0.0, 0.0), Complex64::new(1e-30, 0.0));
        let mut all = vec![Complex64::new(0.0, 0.0); start + 1];
        for n in (1..=start).rev() {
            let below = (2 * n + 1) as f64 / z * cur - above;
            above = cur;
            cur = below;
            all[n - 1] = cur;
        }
        let scale = (z.sin() / z) / all[0];
        for n in 0..=n_max + 1 {
            out[n] = z * all[n] * scale;
        }
        out
    }

    #[test]
    fn cross_sections_against_redundant_precision_series() {
        let x = 0.83;
        let m = Complex64::new(1.54, 0.0);
        let sol = solve_sphere(radius_for(x), m, LAMBDA, None).unwrap();
        let n_max = 2 * sol.n_max;
        let mx = m * x;
        let psi_m = psi_complex(n_max, mx);
        let j = spherical_j(n_max + 1, x);
        let y = spherical_y(n_max + 1, x);
        let mut ext = DoubleDouble::default();
        let mut sca = DoubleDouble::default();
        for n in 1..=n_max {
            let nf = n as f64;
            let psi = x * j[n];
            let dpsi = x * j[n - 1] - nf * j[n];
            let xi = Complex64::new(x * j[n], x * y[n]);
            let dxi = Complex64::new(x * j[n - 1] - nf * j[n], x * y[n - 1] - nf * y[n]);
            let pm = psi_m[n];
            let dpm = psi_m[n - 1] - nf / mx * psi_m[n];
            let a = (m * pm * dpsi - psi * dpm) / (m * pm * dxi - xi * dpm);
            let b = (pm * dpsi - m * psi * dpm) / (pm * dxi - m * xi * dpm);
            ext.add((2.0 * nf + 1.0) * (a + b).re);
            sca.add((2.0 * nf + 1.0) * (a.norm_sqr() + b.norm_sqr()));
        }
        let q_ext = 2.0 * ext.value() / (x * x);
        let q_sca = 2.0 * sca.value() / (x * x);
        assert!(((q_ext - sol.extinction_efficiency()) / q_ext).abs() < 1e-12);
        assert!(((q_sca - sol.scattering_efficiency()) / q_sca).abs() < 1e-12);
    }
}
