//! Optical force on the sphere by Maxwell-stress-tensor integration, and the
//! phase modulation parameter that follows from it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{angular_functions, mie_solve, MieSolution};
use crate::error::{Error, Result};
use crate::model::constants::{HBAR, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};
use crate::model::{GratingSpec, ParticleSpec};
use crate::special::gauss_legendre;
use crate::special::spherical::{spherical_j, spherical_y};

/// Size parameter above which the point-dipole phase is not trusted.
pub const RAYLEIGH_LIMIT: f64 = 0.3;

const MU0: f64 = 1.0 / (VACUUM_PERMITTIVITY * SPEED_OF_LIGHT * SPEED_OF_LIGHT);

type Vec3 = [Complex64; 3];

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Scattered near field of a unit-amplitude, x-polarized plane wave travelling along +z,
/// tabulated on a sphere of fixed radius.
struct ScatteredField<'a> {
    mie: &'a MieSolution,
    rho: f64,
    h: Vec<Complex64>,
    dh: Vec<Complex64>,
    e_n: Vec<Complex64>,
}

impl<'a> ScatteredField<'a> {
    fn new(mie: &'a MieSolution, r: f64) -> Self {
        let n_max = mie.n_max;
        let rho = mie.wavenumber() * r;
        let j = spherical_j(n_max, rho);
        let y = spherical_y(n_max, rho);
        let h: Vec<Complex64> = (0..=n_max).map(|n| Complex64::new(j[n], y[n])).collect();
        let mut dh = vec![c(0.0); n_max + 1];
        for n in 1..=n_max {
            dh[n] = h[n - 1] - h[n] * (n as f64 / rho);
        }
        let e_n = (0..=n_max)
            .map(|n| {
                if n == 0 {
                    c(0.0)
                } else {
                    Complex64::i().powu(n as u32) * ((2 * n + 1) as f64 / (n * (n + 1)) as f64)
                }
            })
            .collect();
        ScatteredField { mie, rho, h, dh, e_n }
    }

    /// Cartesian (E, H) at direction (theta, phi).
    fn at(&self, theta: f64, phi: f64) -> (Vec3, Vec3) {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let (pi_n, tau_n) = angular_functions(self.mie.n_max, ct);
        let i = Complex64::i();
        // spherical components (r, theta, phi)
        let mut e = [c(0.0); 3];
        let mut hf = [c(0.0); 3];
        for n in 1..=self.mie.n_max {
            let nn1 = (n * (n + 1)) as f64;
            let (hn, dhn) = (self.h[n], self.dh[n]);
            let (p, t) = (pi_n[n], tau_n[n]);
            let m_o = [c(0.0), cp * p * hn, -sp * t * hn];
            let m_e = [c(0.0), -sp * p * hn, -cp * t * hn];
            let n_o = [sp * nn1 * st * p * hn / self.rho, sp * t * dhn, cp * p * dhn];
            let n_e = [cp * nn1 * st * p * hn / self.rho, cp * t * dhn, -sp * p * dhn];
            let (an, bn, en) = (self.mie.a[n - 1], self.mie.b[n - 1], self.e_n[n]);
            for q in 0..3 {
                e[q] += en * (i * an * n_e[q] - bn * m_o[q]);
                hf[q] += en * (i * bn * n_o[q] + an * m_e[q]);
            }
        }
        let scale = VACUUM_PERMITTIVITY * SPEED_OF_LIGHT;
        for v in hf.iter_mut() {
            *v *= scale;
        }
        (to_cartesian(e, st, ct, sp, cp), to_cartesian(hf, st, ct, sp, cp))
    }
}

fn to_cartesian(v: Vec3, st: f64, ct: f64, sp: f64, cp: f64) -> Vec3 {
    let [vr, vt, vp] = v;
    [vr * st * cp + vt * ct * cp - vp * sp, vr * st * sp + vt * ct * sp + vp * cp, vr * ct - vt * st]
}

/// Rotation by pi about x: (x, y, z) -> (x, -y, -z).
fn flip(v: Vec3) -> Vec3 {
    [v[0], -v[1], -v[2]]
}

fn traction(e: &Vec3, h: &Vec3, n: [f64; 3]) -> [f64; 3] {
    let en: Complex64 = (0..3).map(|q| e[q].conj() * n[q]).sum();
    let hn: Complex64 = (0..3).map(|q| h[q].conj() * n[q]).sum();
    let e2: f64 = e.iter().map(|v| v.norm_sqr()).sum();
    let h2: f64 = h.iter().map(|v| v.norm_sqr()).sum();
    let iso = 0.5 * (VACUUM_PERMITTIVITY * e2 + MU0 * h2);
    let mut t = [0.0; 3];
    for q in 0..3 {
        t[q] = 0.5 * (VACUUM_PERMITTIVITY * (e[q] * en).re + MU0 * (h[q] * hn).re - iso * n[q]);
    }
    t
}

/// Integrates the time-averaged stress tensor of incident + scattered fields, minus the
/// incident-only part, over a sphere enclosing the particle.
fn stress_integral<F>(mie: &MieSolution, fields: F) -> Result<[f64; 3]>
where
    F: Fn(&ScatteredField, [f64; 3], f64, f64) -> ((Vec3, Vec3), (Vec3, Vec3)),
{
    let r = 2.0 * mie.radius;
    let sf = ScatteredField::new(mie, r);
    let n_theta = 2 * mie.n_max + 16;
    let n_phi = 16;
    let (mu, w) = gauss_legendre(n_theta);
    let mut force = [0.0; 3];
    for (&ct, &wt) in mu.iter().zip(&w) {
        let theta = ct.acos();
        let st = theta.sin();
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            let n = [st * phi.cos(), st * phi.sin(), ct];
            let pos = [r * n[0], r * n[1], r * n[2]];
            let ((ei, hi), (es, hs)) = fields(&sf, pos, theta, phi);
            let et: Vec3 = std::array::from_fn(|q| ei[q] + es[q]);
            let ht: Vec3 = std::array::from_fn(|q| hi[q] + hs[q]);
            let tt = traction(&et, &ht, n);
            let t0 = traction(&ei, &hi, n);
            for q in 0..3 {
                force[q] += (tt[q] - t0[q]) * wt * 2.0 * PI / n_phi as f64 * r * r;
            }
        }
    }
    if force.iter().any(|f| !f.is_finite()) {
        return Err(Error::numerical("stress-tensor force is not finite"));
    }
    Ok(force)
}

fn incident(k: f64, z: f64, forward: bool) -> (Vec3, Vec3) {
    let phase = Complex64::from_polar(1.0, if forward { k * z } else { -k * z });
    let hs = VACUUM_PERMITTIVITY * SPEED_OF_LIGHT * if forward { 1.0 } else { -1.0 };
    ([phase, c(0.0), c(0.0)], [c(0.0), phase * hs, c(0.0)])
}

/// Time-averaged force, N, from a single x-polarized plane wave of amplitude E0 along +z.
pub fn plane_wave_force(mie: &MieSolution, field_amplitude: f64) -> Result<[f64; 3]> {
    let k = mie.wavenumber();
    let f = stress_integral(mie, |sf, pos, theta, phi| (incident(k, pos[2], true), sf.at(theta, phi)))?;
    Ok(f.map(|v| v * field_amplitude * field_amplitude))
}

/// Time-averaged force, N, in the standing wave E0 cos(k (z + z0)) x-hat, with the sphere at z = 0.
pub fn standing_wave_force(mie: &MieSolution, field_amplitude: f64, z0: f64) -> Result<[f64; 3]> {
    let k = mie.wavenumber();
    let p1 = Complex64::from_polar(0.5, k * z0);
    let p2 = Complex64::from_polar(0.5, -k * z0);
    let f = stress_integral(mie, |sf, pos, theta, phi| {
        let (e1, h1) = incident(k, pos[2], true);
        let (e2, h2) = incident(k, pos[2], false);
        let (es1, hs1) = sf.at(theta, phi);
        let (es2, hs2) = sf.at(PI - theta, -phi);
        let (es2, hs2) = (flip(es2), flip(hs2));
        let mix = |a: Vec3, b: Vec3| -> Vec3 { std::array::from_fn(|q| p1 * a[q] + p2 * b[q]) };
        ((mix(e1, e2), mix(h1, h2)), (mix(es1, es2), mix(hs1, hs2)))
    })?;
    Ok(f.map(|v| v * field_amplitude * field_amplitude))
}

/// Amplitude F0 of the periodic force F_z = -F0 sin(2k(z + z0)) in the standing grating.
///
/// Positive F0 pulls the sphere toward intensity maxima.
pub fn grating_force_amplitude(mie: &MieSolution, grating: &GratingSpec) -> Result<f64> {
    check_wavelength(mie, grating)?;
    unit_force_amplitude(mie).map(|f| f * grating.field_amplitude * grating.field_amplitude)
}

fn unit_force_amplitude(mie: &MieSolution) -> Result<f64> {
    let z0 = mie.wavelength / 8.0;
    Ok(-standing_wave_force(mie, 1.0, z0)?[2])
}

fn check_wavelength(mie: &MieSolution, grating: &GratingSpec) -> Result<()> {
    if ((mie.wavelength - grating.wavelength) / grating.wavelength).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "Mie solution at {} m does not match grating wavelength {} m",
            mie.wavelength, grating.wavelength
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Rayleigh,
    Mie,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseModulation {
    pub phi0: f64,
    pub regime: Regime,
    pub size_parameter: f64,
    pub warnings: Vec<String>,
}

/// Phase imprinted per unit pulse energy, J^-1.
fn phase_per_energy(particle: &ParticleSpec, grating: &GratingSpec, regime: Regime) -> Result<f64> {
    let denom = HBAR * SPEED_OF_LIGHT * VACUUM_PERMITTIVITY * grating.spot_area;
    match regime {
        Regime::Rayleigh => Ok(2.0 * particle.static_polarizability_real() / denom),
        Regime::Mie => {
            let mie = mie_solve(particle, grating.wavelength)?;
            Ok(8.0 * unit_force_amplitude(&mie)? / (denom * grating.wavenumber()))
        }
    }
}

/// Phase modulation parameter of one grating pulse.
///
/// The point-dipole formula is refused above [`RAYLEIGH_LIMIT`] unless `force` is set, in which
/// case the result carries a warning.
pub fn phase_modulation(
    particle: &ParticleSpec,
    grating: &GratingSpec,
    regime: Regime,
    force: bool,
) -> Result<PhaseModulation> {
    let x = particle.size_parameter(grating.wavelength);
    let mut warnings = Vec::new();
    if regime == Regime::Rayleigh && x >= RAYLEIGH_LIMIT {
        if !force {
            return Err(Error::Unsupported(format!(
                "point-dipole phase requested at kR = {x:.3} (limit {RAYLEIGH_LIMIT}); use the Mie regime or force it"
            )));
        }
        warnings.push(format!("point-dipole phase forced at kR = {x:.3}"));
        if x >= 1.0 {
            log::warn!("point-dipole phase forced at kR = {x:.3}");
        }
    }
    let phi0 = phase_per_energy(particle, grating, regime)? * grating.pulse_energy;
    Ok(PhaseModulation { phi0, regime, size_parameter: x, warnings })
}

/// Pulse energy, J, that produces the requested phase modulation.
pub fn pulse_energy_for_phase(
    particle: &ParticleSpec,
    grating: &GratingSpec,
    regime: Regime,
    phi0: f64,
) -> Result<f64> {
    let per = phase_per_energy(particle, grating, regime)?;
    if per <= 0.0 {
        return Err(Error::domain(format!("grating cannot reach phi0 = {phi0}: phase per joule is {per:e}")));
    }
    Ok(phi0 / per)
}

/// Force amplitude per squared field, N m^2 V^-2, for a bare sphere at size parameter x.
pub fn unit_force_at(x: f64, refractive_index: Complex64, wavelength: f64) -> Result<f64> {
    let mie = super::solve_sphere(x * wavelength / (2.0 * PI), refractive_index, wavelength, None)?;
    unit_force_amplitude(&mie)
}

/// First size parameter in [x_lo, x_hi] where F0 turns from positive to non-positive, located by
/// a scan of the given step followed by bisection.
pub fn force_sign_change(
    refractive_index: Complex64,
    wavelength: f64,
    x_lo: f64,
    x_hi: f64,
    step: f64,
) -> Result<Option<f64>> {
    let f = |x: f64| unit_force_at(x, refractive_index, wavelength);
    let mut x0 = x_lo;
    let mut f0 = f(x0)?;
    while x0 < x_hi {
        let x1 = (x0 + step).min(x_hi);
        let f1 = f(x1)?;
        if f0 > 0.0 && f1 <= 0.0 {
            let (mut a, mut b) = (x0, x1);
            for _ in 0..50 {
                let mid = 0.5 * (a + b);
                if f(mid)? > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mie::solve_sphere;
    use crate::model::DEFAULT_GRATING_INDEX;

    const LAMBDA: f64 = 213e-9;

    fn sphere(x: f64) -> MieSolution {
        solve_sphere(x * LAMBDA / (2.0 * PI), c(DEFAULT_GRATING_INDEX), LAMBDA, None).unwrap()
    }

    fn grating(field: f64) -> GratingSpec {
        GratingSpec {
            wavelength: LAMBDA,
            pulse_energy: 1e-3,
            spot_area: 1e-6,
            pulse_duration: 1e-9,
            field_amplitude: field,
        }
    }

    #[test]
    fn single_wave_pushes_with_radiation_pressure() {
        for &x in &[0.2, 0.83, 2.0] {
            let mie = sphere(x);
            let f = plane_wave_force(&mie, 1.0).unwrap();
            let expected = 0.5 * VACUUM_PERMITTIVITY * mie.radiation_pressure_cross_section();
            assert!(((f[2] - expected) / expected).abs() < 1e-8, "x={x}: {} vs {expected}", f[2]);
            assert!(f[0].abs() < 1e-10 * expected && f[1].abs() < 1e-10 * expected);
        }
    }

    #[test]
    fn standing_wave_force_is_transversely_balanced() {
        let mie = sphere(0.83);
        let f = standing_wave_force(&mie, 1.0, LAMBDA / 8.0).unwrap();
        assert!(f[0].abs() < 1e-10 * f[2].abs() && f[1].abs() < 1e-10 * f[2].abs());
        // At a node or antinode the gradient force vanishes by symmetry.
        let f_node = standing_wave_force(&mie, 1.0, 0.0).unwrap();
        assert!(f_node[2].abs() < 1e-9 * f[2].abs());
    }

    #[test]
    fn dipole_limit_of_force_amplitude() {
        let x = 0.01;
        let mie = sphere(x);
        let e0 = 1e6;
        let f0 = grating_force_amplitude(&mie, &grating(e0)).unwrap();
        let m2 = c(DEFAULT_GRATING_INDEX).powu(2);
        let alpha = 4.0 * PI * VACUUM_PERMITTIVITY * mie.radius.powi(3) * ((m2 - 1.0) / (m2 + 2.0)).re;
        let expected = alpha * mie.wavenumber() * e0 * e0 / 4.0;
        assert!(((f0 - expected) / expected).abs() < 1e-3, "{f0} vs {expected}");
    }

    #[test]
    fn zero_field_gives_zero_force() {
        assert_eq!(grating_force_amplitude(&sphere(0.5), &grating(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn weak_contrast_follows_volume_average() {
        // For n -> 1 the force is the volume average of the standing-wave gradient,
        // 3 j1(2x)/(2x) times the dipole value.
        let n = 1.001;
        let cm = (n * n - 1.0) / (n * n + 2.0);
        for &x in &[0.3, 1.0, 1.6, 2.4] {
            let mie = solve_sphere(x * LAMBDA / (2.0 * PI), c(n), LAMBDA, None).unwrap();
            let alpha = 4.0 * PI * VACUUM_PERMITTIVITY * mie.radius.powi(3) * cm;
            let ratio = unit_force_amplitude(&mie).unwrap() / (alpha * mie.wavenumber() / 4.0);
            let y = 2.0 * x;
            let oracle = 3.0 * (y.sin() / (y * y) - y.cos() / y) / y;
            assert!((ratio - oracle).abs() < 2e-3, "x={x}: {ratio} vs {oracle}");
        }
    }

    #[test]
    fn force_falls_off_and_changes_sign() {
        let n = c(DEFAULT_GRATING_INDEX);
        let peak = unit_force_at(1.25, n, LAMBDA).unwrap();
        assert!(peak > unit_force_at(0.8, n, LAMBDA).unwrap());
        assert!(peak > unit_force_at(1.5, n, LAMBDA).unwrap());
        let x = force_sign_change(n, LAMBDA, 0.5, 3.0, 0.05).unwrap().expect("no sign change");
        assert!(unit_force_at(x - 1e-3, n, LAMBDA).unwrap() > 0.0);
        assert!(unit_force_at(x + 1e-3, n, LAMBDA).unwrap() < 0.0);
        // a denser sphere turns over earlier
        let x2 = force_sign_change(c(2.0), LAMBDA, 0.5, 3.0, 0.05).unwrap().unwrap();
        assert!(x2 < x);
    }

    #[test]
    fn wavelength_mismatch_is_rejected() {
        let mie = sphere(0.5);
        let mut g = grating(1.0);
        g.wavelength = 532e-9;
        assert!(grating_force_amplitude(&mie, &g).is_err());
    }

    fn particle(x: f64) -> ParticleSpec {
        ParticleSpec::from_radius(x * LAMBDA / (2.0 * PI), 1850.0, c(DEFAULT_GRATING_INDEX)).unwrap()
    }

    #[test]
    fn rayleigh_and_mie_phases_agree_for_small_spheres() {
        for &x in &[0.01, 0.05] {
            let p = particle(x);
            let g = grating(1e6);
            let r = phase_modulation(&p, &g, Regime::Rayleigh, false).unwrap().phi0;
            let m = phase_modulation(&p, &g, Regime::Mie, false).unwrap().phi0;
            let tol = if x <= 0.01 { 0.01 } else { 0.02 };
            assert!((m / r - 1.0).abs() < tol, "x={x}: ratio {}", m / r);
        }
    }

    #[test]
    fn rayleigh_phase_scales_with_volume() {
        let g = grating(1e6);
        let p1 = phase_modulation(&particle(0.02), &g, Regime::Rayleigh, false).unwrap().phi0;
        let p2 = phase_modulation(&particle(0.04), &g, Regime::Rayleigh, false).unwrap().phi0;
        assert!((p2 / p1 - 8.0).abs() < 1e-10);
    }

    #[test]
    fn zero_energy_gives_zero_phase() {
        let mut g = grating(1e6);
        g.pulse_energy = 0.0;
        for regime in [Regime::Rayleigh, Regime::Mie] {
            assert_eq!(phase_modulation(&particle(0.1), &g, regime, false).unwrap().phi0, 0.0);
        }
    }

    #[test]
    fn forced_rayleigh_is_flagged() {
        let g = grating(1e6);
        assert!(phase_modulation(&particle(1.2), &g, Regime::Rayleigh, false).is_err());
        let pm = phase_modulation(&particle(1.2), &g, Regime::Rayleigh, true).unwrap();
        assert_eq!(pm.warnings.len(), 1);
    }

    #[test]
    fn pulse_energy_inverts_phase() {
        let p = particle(0.6);
        let g = grating(1e6);
        let e = pulse_energy_for_phase(&p, &g, Regime::Mie, std::f64::consts::FRAC_PI_2).unwrap();
        let phi = phase_modulation(&p, &g.with_pulse_energy(e), Regime::Mie, false).unwrap().phi0;
        assert!((phi - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
