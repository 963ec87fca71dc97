use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::Mode;
use crate::error::{Error, Result};
use crate::mie::GratingDecoherenceKernel;
use crate::special::fourier::{fourier_coefficients, sample_count, FourierOptions};
use crate::special::{bessel_j, laurent_exponential_coefficient};

/// Leakage allowed beyond the requested order.
const TAIL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    QuantumRayleigh,
    ClassicalRayleigh,
    QuantumMie,
    ClassicalMie,
}

impl CoefficientMode {
    pub fn new(mode: Mode, mie: bool) -> Self {
        match (mode, mie) {
            (Mode::Quantum, false) => CoefficientMode::QuantumRayleigh,
            (Mode::Classical, false) => CoefficientMode::ClassicalRayleigh,
            (Mode::Quantum, true) => CoefficientMode::QuantumMie,
            (Mode::Classical, true) => CoefficientMode::ClassicalMie,
        }
    }
}

/// B_n(u) for n in [-order, order].
#[derive(Debug, Clone, Serialize)]
pub struct TalbotCoefficients {
    pub argument: f64,
    pub order: usize,
    pub mode: CoefficientMode,
    /// B_{-order} .. B_{order}
    pub values: Vec<Complex64>,
}

impl TalbotCoefficients {
    pub fn get(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.order {
            return Complex64::new(0.0, 0.0);
        }
        self.values[(n + self.order as i64) as usize]
    }

    pub fn power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

fn bessel_argument(phi0: f64, u: f64, mode: Mode) -> f64 {
    match mode {
        Mode::Quantum => phi0 * (PI * u).sin(),
        Mode::Classical => phi0 * PI * u,
    }
}

/// Closed-form coefficients of a pure phase grating: J_n(phi0 sin(pi u)), or J_n(phi0 pi u)
/// for the classical shadow.
pub fn talbot_coefficients_closed_form(phi0: f64, u: f64, order: usize, mode: Mode) -> Result<TalbotCoefficients> {
    if order < 1 {
        return Err(Error::domain("coefficient order must be at least 1"));
    }
    let arg = bessel_argument(phi0, u, mode);
    let n = order as i32;
    let values = (-n..=n).map(|k| bessel_j(k, arg).map(|v| Complex64::new(v, 0.0))).collect::<Result<_>>()?;
    Ok(TalbotCoefficients { argument: u, order, mode: CoefficientMode::new(mode, false), values })
}

/// Everything the grating pulse does to a pair of arms separated by s = u d: the coherent phase,
/// scattering of grating photons and their absorption.
#[derive(Debug, Clone)]
pub struct GratingKernel {
    pub phi0: f64,
    /// Grating period d, m.
    pub period: f64,
    pub scattering: Option<GratingDecoherenceKernel>,
    /// Mean photons absorbed at an antinode.
    pub mean_absorbed_photons: f64,
    /// Whether the phase comes from the finite-size force rather than the point dipole.
    pub mie_phase: bool,
}

/// Kernel evaluator at a fixed argument u; the separation-dependent factors are precomputed.
struct KernelAt {
    phi0: f64,
    k: f64,
    s: f64,
    mode: Mode,
    u: f64,
    scattering: Option<(f64, f64, f64)>,
    absorbed: f64,
}

impl KernelAt {
    fn eval(&self, x: f64) -> Complex64 {
        let phase = match self.mode {
            Mode::Quantum => {
                let a = (self.k * (x - 0.5 * self.s)).cos();
                let b = (self.k * (x + 0.5 * self.s)).cos();
                self.phi0 * (a * a - b * b)
            }
            Mode::Classical => self.phi0 * PI * self.u * (2.0 * self.k * x).sin(),
        };
        let mut log = Complex64::new(0.0, phase);
        if let Some((f, a, b)) = self.scattering {
            let (s2, c2) = (2.0 * self.k * x).sin_cos();
            log += Complex64::new(f + a * c2, b * s2);
        }
        if self.absorbed > 0.0 {
            let diff = (self.k * (x - 0.5 * self.s)).cos() - (self.k * (x + 0.5 * self.s)).cos();
            log.re -= 0.5 * self.absorbed * diff * diff;
        }
        log.exp()
    }
}

impl GratingKernel {
    /// Pure phase grating.
    pub fn coherent(phi0: f64, period: f64) -> Self {
        GratingKernel { phi0, period, scattering: None, mean_absorbed_photons: 0.0, mie_phase: false }
    }

    /// True when no photon is scattered or absorbed.
    pub fn is_coherent(&self) -> bool {
        self.scattering.as_ref().is_none_or(|k| k.mean_scattered_photons() == 0.0) && self.mean_absorbed_photons == 0.0
    }

    fn at(&self, u: f64, mode: Mode) -> KernelAt {
        let s = u * self.period;
        KernelAt {
            phi0: self.phi0,
            k: PI / self.period,
            s,
            mode,
            u,
            scattering: self
                .scattering
                .as_ref()
                .filter(|k| k.mean_scattered_photons() > 0.0 && s != 0.0)
                .map(|k| k.coefficients(s)),
            absorbed: self.mean_absorbed_photons,
        }
    }

    /// t(x - s/2) t*(x + s/2) R(x, s) at s = u d.
    pub fn value(&self, x: f64, u: f64, mode: Mode) -> Complex64 {
        self.at(u, mode).eval(x)
    }

    /// (C, alpha, beta) of the exponent C + alpha cos(2kx) + i beta sin(2kx) at argument u.
    fn exponent(&self, u: f64, mode: Mode) -> (f64, f64, f64) {
        let mut beta = bessel_argument(self.phi0, u, mode);
        let (mut c, mut alpha) = (0.0, 0.0);
        if let Some(k) = self.scattering.as_ref().filter(|k| k.mean_scattered_photons() > 0.0 && u != 0.0) {
            let (f, a, b) = k.coefficients(u * self.period);
            c += f;
            alpha += a;
            beta += b;
        }
        if self.mean_absorbed_photons > 0.0 {
            let w = self.mean_absorbed_photons * (0.5 * PI * u).sin().powi(2);
            c -= w;
            alpha += w;
        }
        (c, alpha, beta)
    }

    /// Number of Fourier orders the kernel occupies at argument u.
    fn bandwidth(&self, u: f64, mode: Mode) -> usize {
        let mut b = bessel_argument(self.phi0, u, mode).abs();
        if let Some(k) = &self.scattering {
            let (_, a, bb) = k.coefficients(u * self.period);
            b += a.abs() + bb.abs();
        }
        b += self.mean_absorbed_photons;
        b.ceil() as usize + 8
    }
}

/// Generalized coefficients by Fourier analysis of the full grating kernel at argument u.
pub fn talbot_coefficients_general(
    kernel: &GratingKernel,
    u: f64,
    order: usize,
    mode: Mode,
) -> Result<TalbotCoefficients> {
    if order < 1 {
        return Err(Error::domain("coefficient order must be at least 1"));
    }
    let at = kernel.at(u, mode);
    let bw = kernel.bandwidth(u, mode);
    let m = sample_count(order, bw, 64);
    let full = fourier_coefficients(|x| at.eval(x), kernel.period, m / 2 - 1, FourierOptions { samples: Some(m) })?;
    let tail: f64 = full.orders().filter(|n| n.unsigned_abs() as usize > order).map(|n| full.get(n).norm()).sum();
    if tail > TAIL_TOLERANCE {
        return Err(Error::numerical(format!("coefficient order {order} too small at u = {u}: tail mass {tail:e}")));
    }
    let values = (-(order as i64)..=order as i64).map(|n| full.get(n)).collect();
    Ok(TalbotCoefficients { argument: u, order, mode: CoefficientMode::new(mode, kernel.mie_phase), values })
}

/// The single coefficient B_n(u) of the full kernel.
///
/// Phase, scattering and absorption all enter the exponent as C + alpha cos(2kx) + i beta sin(2kx),
/// so B_n = e^C c_n(p, q) with p, q = (alpha +- beta)/2 and c_n the Laurent coefficient of
/// exp(p t + q/t). The Fourier analysis in [`talbot_coefficients_general`] is the numerical
/// cross-check of this form.
pub fn general_coefficient(kernel: &GratingKernel, n: i64, u: f64, mode: Mode) -> Result<Complex64> {
    let (c, alpha, beta) = kernel.exponent(u, mode);
    let order = i32::try_from(n).map_err(|_| Error::domain(format!("coefficient order {n} out of range")))?;
    let value = laurent_exponential_coefficient(order, 0.5 * (alpha + beta), 0.5 * (alpha - beta))?;
    Ok(Complex64::new(c.exp() * value, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mie::{solve_sphere, DEFAULT_THETA_NODES};
    use proptest::prelude::*;

    const D: f64 = 106.5e-9;

    #[test]
    fn zero_phase_is_identity() {
        let c = talbot_coefficients_closed_form(0.0, 0.37, 5, Mode::Quantum).unwrap();
        assert_eq!(c.get(0), Complex64::new(1.0, 0.0));
        for n in 1..=5 {
            assert_eq!(c.get(n).norm(), 0.0);
        }
    }

    #[test]
    fn zero_argument_is_identity_for_any_phase() {
        let c = talbot_coefficients_closed_form(8.0 * PI, 0.0, 10, Mode::Quantum).unwrap();
        assert_eq!(c.get(0), Complex64::new(1.0, 0.0));
        assert!((1..=10).all(|n| c.get(n).norm() == 0.0 && c.get(-n).norm() == 0.0));
    }

    #[test]
    fn first_order_at_half_talbot_argument() {
        let c = talbot_coefficients_closed_form(PI / 2.0, 0.5, 3, Mode::Quantum).unwrap();
        // J1(pi/2) from its ascending series
        let x = PI / 2.0;
        let mut term = x / 2.0;
        let mut sum = term;
        for k in 1..40 {
            term *= -(x * x / 4.0) / (k as f64 * (k + 1) as f64);
            sum += term;
        }
        assert!((c.get(1).re - sum).abs() < 1e-14);
    }

    #[test]
    fn general_matches_closed_form_without_decoherence() {
        let kernel = GratingKernel::coherent(PI / 2.0, D);
        for mode in [Mode::Quantum, Mode::Classical] {
            for &u in &[0.13, 0.5, 1.7] {
                let g = talbot_coefficients_general(&kernel, u, 24, mode).unwrap();
                let c = talbot_coefficients_closed_form(PI / 2.0, u, 10, mode).unwrap();
                for n in -10..=10 {
                    assert!((g.get(n) - c.get(n)).norm() < 1e-8, "{mode:?} u={u} n={n}");
                    assert!((general_coefficient(&kernel, n, u, mode).unwrap() - c.get(n)).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn zero_photons_is_decoherence_free() {
        let mie = solve_sphere(27.8e-9, Complex64::new(1.54, 0.0), 2.0 * D, None).unwrap();
        let mut kernel = GratingKernel::coherent(3.0, D);
        kernel.scattering = Some(GratingDecoherenceKernel::new(&mie, 0.0, 64).unwrap());
        assert!(kernel.is_coherent());
        let g = talbot_coefficients_general(&kernel, 0.3, 12, Mode::Quantum).unwrap();
        let c = talbot_coefficients_closed_form(3.0, 0.3, 12, Mode::Quantum).unwrap();
        for n in -12..=12 {
            assert!((g.get(n) - c.get(n)).norm() < 1e-12);
        }
    }

    #[test]
    fn grating_photons_contract_the_spectrum() {
        let mie = solve_sphere(27.8e-9, Complex64::new(1.54, 0.0), 2.0 * D, None).unwrap();
        let mut kernel = GratingKernel::coherent(8.0 * PI, D);
        kernel.scattering = Some(GratingDecoherenceKernel::new(&mie, 3.0, DEFAULT_THETA_NODES).unwrap());
        kernel.mean_absorbed_photons = 0.5;
        for &u in &[0.05, 0.4, 1.3] {
            let g = talbot_coefficients_general(&kernel, u, 60, Mode::Quantum).unwrap();
            let c = talbot_coefficients_closed_form(8.0 * PI, u, 60, Mode::Quantum).unwrap();
            assert!(g.power() <= c.power() + 1e-12, "u={u}");
            // each order is bounded by the period average of |R|
            let mean_r =
                (0..4096).map(|j| kernel.value(D * j as f64 / 4096.0, u, Mode::Quantum).norm()).sum::<f64>() / 4096.0;
            assert!(mean_r < 1.0);
            for n in -60..=60 {
                assert!(g.get(n).norm() <= mean_r + 1e-12, "u={u} n={n}");
            }
        }
    }

    #[test]
    fn single_coefficient_matches_fourier_analysis() {
        let mie = solve_sphere(27.8e-9, Complex64::new(1.54, 0.02), 2.0 * D, None).unwrap();
        let mut kernel = GratingKernel::coherent(8.0 * PI, D);
        kernel.scattering = Some(GratingDecoherenceKernel::new(&mie, 3.0, DEFAULT_THETA_NODES).unwrap());
        kernel.mean_absorbed_photons = 0.7;
        for mode in [Mode::Quantum, Mode::Classical] {
            for &u in &[0.0, 0.013, 0.4, 1.3, -0.7] {
                let g = talbot_coefficients_general(&kernel, u, 180, mode).unwrap();
                for n in -40..=40 {
                    let b = general_coefficient(&kernel, n, u, mode).unwrap();
                    assert!((b - g.get(n)).norm() < 1e-12, "{mode:?} u={u} n={n}: {b} vs {}", g.get(n));
                }
            }
        }
    }

    #[test]
    fn uniform_loss_contracts_every_order() {
        // far-separated arms: the scattering factor no longer depends on position
        let mie = solve_sphere(27.8e-9, Complex64::new(1.54, 0.0), 2.0 * D, None).unwrap();
        let mut kernel = GratingKernel::coherent(2.0, D);
        kernel.scattering = Some(GratingDecoherenceKernel::new(&mie, 1.0, DEFAULT_THETA_NODES).unwrap());
        let u = 40.5;
        let (_, a, b) = kernel.scattering.as_ref().unwrap().coefficients(u * D);
        assert!(a.abs() < 0.05 && b.abs() < 0.05);
        let g = talbot_coefficients_general(&kernel, u, 30, Mode::Quantum).unwrap();
        let c = talbot_coefficients_closed_form(2.0, u, 30, Mode::Quantum).unwrap();
        for n in -30..=30 {
            assert!(g.get(n).norm() <= c.get(n).norm() + 1e-12, "n={n}");
        }
    }

    #[test]
    fn too_small_order_is_reported() {
        let kernel = GratingKernel::coherent(8.0 * PI, D);
        assert!(talbot_coefficients_general(&kernel, 0.5, 5, Mode::Quantum).is_err());
    }

    #[test]
    fn talbot_revival_at_integer_argument() {
        for u in 1..4 {
            let c = talbot_coefficients_closed_form(8.0 * PI, u as f64, 20, Mode::Quantum).unwrap();
            assert!((c.get(0).re - 1.0).abs() < 1e-12);
            assert!((1..=20).all(|n| c.get(n).norm() < 1e-12));
        }
    }

    #[test]
    fn quantum_and_classical_agree_for_small_argument() {
        let u = 1e-3;
        let q = talbot_coefficients_closed_form(8.0 * PI, u, 4, Mode::Quantum).unwrap();
        let c = talbot_coefficients_closed_form(8.0 * PI, u, 4, Mode::Classical).unwrap();
        for n in 0..=4 {
            let (a, b) = (q.get(n).re, c.get(n).re);
            if b.abs() > 1e-12 {
                assert!(((a - b) / b).abs() < 1e-5, "n={n}: {a} vs {b}");
            }
        }
    }

    proptest! {
        #[test]
        fn unitarity_of_phase_grating(phi0 in 0.0..(8.0 * PI), u in -3.0..3.0f64) {
            let c = talbot_coefficients_closed_form(phi0, u, 120, Mode::Quantum).unwrap();
            prop_assert!((c.power() - 1.0).abs() < 1e-10);
            prop_assert!(c.get(0).im == 0.0);
            for n in 1..=120 {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert!((c.get(-n) - sign * c.get(n)).norm() < 1e-14);
            }
        }
    }
}
