//! Decoherence of the grating pulse itself: Rayleigh/Mie scattering of grating photons and
//! their absorption.
//!
//! Coherences are written for the pair of arms z - s/2 (ket) and z + s/2 (bra), with z measured
//! from an intensity antinode of the standing wave.

use num_complex::Complex64;

use super::MieSolution;
use crate::error::{Error, Result};
use crate::model::GratingSpec;
use crate::special::gauss_legendre;

/// Polar nodes of the angular quadrature. The azimuthal integral is done in closed form.
pub const DEFAULT_THETA_NODES: usize = 256;

/// Mean number of grating photons scattered by the sphere, averaged over the grating period.
pub fn mean_scattered_photons(mie: &MieSolution, grating: &GratingSpec) -> f64 {
    2.0 * mie.scattering_cross_section() * grating.photon_fluence()
}

/// Mean number of grating photons absorbed by a sphere sitting at an antinode.
pub fn mean_absorbed_photons(mie: &MieSolution, grating: &GratingSpec) -> f64 {
    4.0 * mie.absorption_cross_section() * grating.photon_fluence()
}

/// Tabulated angular structure of the scattering amplitude in the standing wave.
///
/// For direction cosine mu along the grating axis the tables hold the azimuthal integrals of
/// |f|^2 and of f_fwd* . f_back, where f_back is the amplitude for the retro-reflected beam.
#[derive(Debug, Clone)]
pub struct GratingDecoherenceKernel {
    wavenumber: f64,
    mean_scattered_photons: f64,
    mu: Vec<f64>,
    weight: Vec<f64>,
    intensity: Vec<f64>,
    cross: Vec<Complex64>,
    norm: f64,
}

impl GratingDecoherenceKernel {
    pub fn new(mie: &MieSolution, mean_scattered_photons: f64, theta_nodes: usize) -> Result<Self> {
        if !(mean_scattered_photons >= 0.0) {
            return Err(Error::domain(format!(
                "mean scattered photon number must be non-negative (got {mean_scattered_photons})"
            )));
        }
        let (mu, weight) = gauss_legendre(theta_nodes);
        let pi = std::f64::consts::PI;
        let mut intensity = Vec::with_capacity(theta_nodes);
        let mut cross = Vec::with_capacity(theta_nodes);
        for &m in &mu {
            let (s1, s2) = mie.amplitudes(m);
            let (r1, r2) = mie.amplitudes(-m);
            intensity.push(pi * (s1.norm_sqr() + s2.norm_sqr()));
            cross.push(pi * (s1.conj() * r1 - s2.conj() * r2));
        }
        let norm: f64 = weight.iter().zip(&intensity).map(|(w, g)| w * g).sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::numerical(format!("angular normalization {norm} is not positive")));
        }
        Ok(GratingDecoherenceKernel {
            wavenumber: mie.wavenumber(),
            mean_scattered_photons,
            mu,
            weight,
            intensity,
            cross,
            norm,
        })
    }

    pub fn mean_scattered_photons(&self) -> f64 {
        self.mean_scattered_photons
    }

    /// Integral of |f|^2 over the sphere; equals k^2 C_sca.
    pub fn angular_norm(&self) -> f64 {
        self.norm
    }

    /// (F, a, b) at separation s, m.
    pub fn coefficients(&self, s: f64) -> (f64, f64, f64) {
        let ks = self.wavenumber * s;
        let (cks, mut f, mut a, mut b) = (ks.cos(), 0.0, 0.0, 0.0);
        for i in 0..self.mu.len() {
            let (m, w) = (self.mu[i], self.weight[i]);
            f += w * self.intensity[i] * (((1.0 - m) * ks).cos() - 1.0);
            a += w * self.cross[i].re * ((m * ks).cos() - cks);
            b += w * self.cross[i].im * (m * ks).sin();
        }
        let scale = self.mean_scattered_photons / self.norm;
        (scale * f, scale * a, scale * b)
    }

    /// Reduction factor exp[F(s) + a(s) cos 2kz + i b(s) sin 2kz].
    pub fn reduction(&self, s: f64, z: f64) -> Complex64 {
        if s == 0.0 || self.mean_scattered_photons == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let (f, a, b) = self.coefficients(s);
        let two_kz = 2.0 * self.wavenumber * z;
        Complex64::new(f + a * two_kz.cos(), b * two_kz.sin()).exp()
    }
}

/// Scattering reduction factor with the default angular grid.
pub fn scattering_reduction(
    mie: &MieSolution,
    grating: &GratingSpec,
    mean_scattered_photons: f64,
    s: f64,
    z: f64,
) -> Result<Complex64> {
    if ((mie.wavelength - grating.wavelength) / grating.wavelength).abs() > 1e-12 {
        return Err(Error::domain("Mie solution and grating wavelengths differ"));
    }
    if !s.is_finite() {
        return Err(Error::domain(format!("separation must be finite (got {s})")));
    }
    let kernel = GratingDecoherenceKernel::new(mie, mean_scattered_photons, DEFAULT_THETA_NODES)?;
    Ok(kernel.reduction(s, z))
}

/// Absorption reduction for arms at x - s/2 and x + s/2, with `mean_absorbed_photons` the
/// mean number absorbed at an antinode: exp[-(n/2)(cos k x1 - cos k x2)^2].
pub fn absorption_reduction(grating: &GratingSpec, mean_absorbed_photons: f64, x: f64, s: f64) -> f64 {
    if mean_absorbed_photons == 0.0 {
        return 1.0;
    }
    let k = grating.wavenumber();
    let diff = (k * (x - 0.5 * s)).cos() - (k * (x + 0.5 * s)).cos();
    (-0.5 * mean_absorbed_photons * diff * diff).exp()
}
