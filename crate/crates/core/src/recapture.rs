//! Catching the particle again: the transverse cooling requirement, the axial force structure near
//! the focus, stopping power, and re-entry position estimates from the trapped motion.
//!
//! Axial coordinates are along the trapping beam, which propagates towards +z; the returning
//! particle falls towards -z, so it meets the region z > 0 first.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::constants::{BOLTZMANN, GRAVITY, HBAR, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};
use crate::model::{ParticleSpec, TrapSpec};

mod reentry;

pub use reentry::{
    estimate_reentry, reentry_trials, synthesize_and_fit_reentry, synthesize_trace, ReentryFit, ReentryParams,
    ReentryStatistics, ReentryTrace,
};

/// Size parameter at the trap wavelength above which the point-dipole force model is refused.
pub const AXIAL_SIZE_LIMIT: f64 = 0.5;
/// Fraction of the peak deceleration at which region III is taken to end.
pub const DEFAULT_REGION_THRESHOLD: f64 = 0.1;

/// U(x) = Re(alpha) P / (c eps0 pi w0^2) exp(-2 x^2 / w0^2), J.
pub fn potential_barrier(x: f64, trap: &TrapSpec, particle: &ParticleSpec) -> f64 {
    let w0 = trap.waist;
    particle.static_polarizability_real() * trap.power / (SPEED_OF_LIGHT * VACUUM_PERMITTIVITY * PI * w0 * w0)
        * (-2.0 * (x / w0).powi(2)).exp()
}

/// Free-fall time sqrt(2 h / g) from the apex back to the trap.
pub fn fall_time(throw_height: f64) -> f64 {
    (2.0 * throw_height / GRAVITY).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransverseConstraint {
    /// Largest transverse displacement at the focal plane that is still caught, m.
    pub x_max: f64,
    /// m s^-1
    pub v_x_max: f64,
    /// Transverse temperature m v^2 / kB, K.
    pub t_max: f64,
    /// m
    pub throw_height: f64,
    /// Up and down, s.
    pub total_time: f64,
    /// Kinetic energy minus barrier at the solution, J.
    pub residual: f64,
    pub feasible: bool,
}

/// Largest transverse speed for which the kinetic energy at the focal plane stays below the
/// optical barrier at the displacement accumulated over the whole flight, x = 2 v_x sqrt(2h/g).
pub fn transverse_constraint(
    throw_height: f64,
    trap: &TrapSpec,
    particle: &ParticleSpec,
) -> Result<TransverseConstraint> {
    if !(throw_height > 0.0) {
        return Err(Error::domain(format!("throw height must be positive, got {throw_height}")));
    }
    let v = trap.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let total_time = 2.0 * fall_time(throw_height);
    let m = particle.mass;
    let gap = |vx: f64| 0.5 * m * vx * vx - potential_barrier(vx * total_time, trap, particle);
    let u0 = potential_barrier(0.0, trap, particle);
    let infeasible = TransverseConstraint {
        x_max: 0.0,
        v_x_max: 0.0,
        t_max: 0.0,
        throw_height,
        total_time,
        residual: -u0,
        feasible: false,
    };
    if !(u0 > 0.0) {
        return Ok(infeasible);
    }
    // gap(0) < 0 and gap grows monotonically, reaching >= 0 at the free-space escape speed
    let (mut lo, mut hi) = (0.0, (2.0 * u0 / m).sqrt());
    if gap(hi) < 0.0 {
        return Ok(infeasible);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v_x_max = lo;
    Ok(TransverseConstraint {
        x_max: v_x_max * total_time,
        v_x_max,
        t_max: m * v_x_max * v_x_max / BOLTZMANN,
        throw_height,
        total_time,
        residual: gap(v_x_max),
        feasible: true,
    })
}

/// Axial gradient and scattering forces of a paraxial focused Gaussian beam.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxialForceProfile {
    /// m
    pub z: Vec<f64>,
    /// N, along +z
    pub f_grad: Vec<f64>,
    /// N, along +z
    pub f_scat: Vec<f64>,
    /// Region I/II boundary where the gradient pull equals the scattering push, m (> 0).
    pub boundary_i_ii: Option<f64>,
    pub focal_plane: f64,
    /// Position of the largest deceleration, m (< 0).
    pub peak_deceleration: f64,
    /// End of region III, m (< 0).
    pub region_iii_end: f64,
    /// Length of region III, m.
    pub region_iii_length: f64,
    /// Mean force over region III along the direction of travel, N; negative when braking.
    pub f_avg: f64,
    /// Power the profile was computed at, W.
    pub power: f64,
    /// kg
    pub mass: f64,
    pub waist: f64,
    pub rayleigh_range: f64,
}

/// Closed-form axial model: intensity, force per unit gradient and scattering cross-section.
struct AxialModel {
    i0: f64,
    zr: f64,
    grad_coeff: f64,
    sigma_pr: f64,
}

impl AxialModel {
    fn new(trap: &TrapSpec, particle: &ParticleSpec) -> Self {
        let w0 = trap.paraxial_waist();
        let zr = PI * w0 * w0 / trap.wavelength;
        let k = 2.0 * PI / trap.wavelength;
        let alpha = particle.polarizability();
        let sigma_sca = k.powi(4) * alpha.norm_sqr() / (6.0 * PI * VACUUM_PERMITTIVITY * VACUUM_PERMITTIVITY);
        AxialModel {
            i0: 2.0 * trap.power / (PI * w0 * w0),
            zr,
            grad_coeff: alpha.re / (2.0 * SPEED_OF_LIGHT * VACUUM_PERMITTIVITY),
            sigma_pr: sigma_sca + particle.absorption_cross_section_trap,
        }
    }

    fn intensity(&self, z: f64) -> f64 {
        self.i0 / (1.0 + (z / self.zr).powi(2))
    }

    fn grad(&self, z: f64) -> f64 {
        let u = z / self.zr;
        self.grad_coeff * (-2.0 * self.i0 * z / (self.zr * self.zr)) / (1.0 + u * u).powi(2)
    }

    fn scat(&self, z: f64) -> f64 {
        self.sigma_pr * self.intensity(z) / SPEED_OF_LIGHT
    }

    fn net(&self, z: f64) -> f64 {
        self.grad(z) + self.scat(z)
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Force profile on z in [-window, window] with `points` samples and the region structure.
pub fn axial_forces(
    trap: &TrapSpec,
    particle: &ParticleSpec,
    window: f64,
    points: usize,
    threshold: f64,
) -> Result<AxialForceProfile> {
    let v = trap.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let x = particle.size_parameter(trap.wavelength);
    if x >= AXIAL_SIZE_LIMIT {
        return Err(Error::Unsupported(format!(
            "point-dipole trap forces need kR < {AXIAL_SIZE_LIMIT} at the trap wavelength (kR = {x:.3}); a Mie treatment of the trap field is required"
        )));
    }
    if !(window > 0.0) || points < 3 || !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::domain("axial profile needs window > 0, at least 3 points and 0 < threshold < 1"));
    }
    let model = AxialModel::new(trap, particle);
    let zr = model.zr;

    // net = 0 on the approach side: kappa u = 1 + u^2 with kappa = 2 grad_coeff / (sigma zr / c)
    let kappa = 2.0 * model.grad_coeff * SPEED_OF_LIGHT / (model.sigma_pr * zr);
    let boundary_i_ii = if model.sigma_pr > 0.0 && kappa > 2.0 {
        let root = 0.5 * (kappa - (kappa * kappa - 4.0).sqrt());
        let z = root * zr;
        Some(bisect(|z| model.net(z), 0.5 * z, 2.0 * z.min(window).max(z))).filter(|&b| b <= window)
    } else {
        None
    };

    // largest deceleration on the far side, then where it has faded to `threshold` of the peak
    let neg = |z: f64| -model.net(z);
    let peak = {
        let (mut a, mut b) = (-window.max(3.0 * zr), 0.0);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if neg(c) < neg(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    };
    let peak_force = model.net(peak);
    let level = threshold * peak_force;
    let mut far = peak;
    while model.net(far) > level {
        far -= zr;
    }
    let region_iii_end = bisect(|z| model.net(z) - level, far, peak);

    // mean of the braking force over region III by Gauss-Legendre on [end, 0]
    let (nodes, weights) = crate::special::gauss_legendre(64);
    let half = -0.5 * region_iii_end;
    let integral: f64 = nodes.iter().zip(&weights).map(|(t, w)| w * half * model.net(half * (t - 1.0))).sum();
    let length = -region_iii_end;
    let z: Vec<f64> = (0..points).map(|i| -window + 2.0 * window * i as f64 / (points - 1) as f64).collect();
    Ok(AxialForceProfile {
        f_grad: z.iter().map(|&z| model.grad(z)).collect(),
        f_scat: z.iter().map(|&z| model.scat(z)).collect(),
        z,
        boundary_i_ii,
        focal_plane: 0.0,
        peak_deceleration: peak,
        region_iii_end,
        region_iii_length: length,
        f_avg: -integral / length,
        power: trap.power,
        mass: particle.mass,
        waist: trap.paraxial_waist(),
        rayleigh_range: zr,
    })
}

/// v_max = sqrt(2 F d / m): the fastest particle a constant force F stops within d.
pub fn max_stoppable_velocity(force: f64, distance: f64, mass: f64) -> Result<f64> {
    if !(force >= 0.0 && distance >= 0.0 && mass > 0.0) {
        return Err(Error::domain(format!(
            "stopping needs force >= 0, distance >= 0 and mass > 0 (got {force}, {distance}, {mass})"
        )));
    }
    Ok((2.0 * force * distance / mass).sqrt())
}

impl AxialForceProfile {
    /// Return speed region III can absorb at this profile's power.
    pub fn max_stoppable_velocity(&self) -> Result<f64> {
        max_stoppable_velocity(-self.f_avg, self.region_iii_length, self.mass)
    }
}

/// Power P0 (v / v_max)^2 that stops a particle returning at `return_speed`, from a baseline where
/// power P0 stops particles up to v_max. Both trap forces are linear in power.
pub fn required_power_from(return_speed: f64, baseline_power: f64, baseline_v_max: f64) -> Result<f64> {
    if !(return_speed > 0.0 && baseline_power > 0.0 && baseline_v_max > 0.0) {
        return Err(Error::domain("required power needs positive speed, baseline power and baseline v_max"));
    }
    Ok(baseline_power * (return_speed / baseline_v_max).powi(2))
}

pub fn required_power(return_speed: f64, baseline: &AxialForceProfile) -> Result<f64> {
    required_power_from(return_speed, baseline.power, baseline.max_stoppable_velocity()?)
}

/// hbar 2 pi nu / kB.
pub fn ground_state_temperature(frequency: f64) -> Result<f64> {
    if !(frequency > 0.0) {
        return Err(Error::domain(format!("frequency must be positive, got {frequency}")));
    }
    Ok(HBAR * 2.0 * PI * frequency / BOLTZMANN)
}

/// sqrt(kB T / (m w0^2)).
pub fn rms_displacement(temperature: f64, mass: f64, angular_frequency: f64) -> Result<f64> {
    if !(temperature >= 0.0 && mass > 0.0 && angular_frequency > 0.0) {
        return Err(Error::domain("rms displacement needs T >= 0, m > 0 and w0 > 0"));
    }
    Ok((BOLTZMANN * temperature / (mass * angular_frequency * angular_frequency)).sqrt())
}

/// The `[recapture]` section of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecaptureSettings {
    pub throw_height_m: f64,
    pub return_speed_m_s: f64,
    /// Diameter of the particle the trap is checked against.
    pub particle_diameter_nm: f64,
    pub window_um: f64,
    pub points: usize,
    pub region_threshold: f64,
    /// Average braking force, stopping distance and mass used for the stopping-power baseline;
    /// the computed axial profile is used when these are absent.
    pub stopping_force_n: Option<f64>,
    pub stopping_distance_m: Option<f64>,
    pub stopping_mass_kg: Option<f64>,
}

impl Default for RecaptureSettings {
    fn default() -> Self {
        RecaptureSettings {
            throw_height_m: 0.1,
            return_speed_m_s: 1.4,
            particle_diameter_nm: 100.0,
            window_um: 4.0,
            points: 801,
            region_threshold: DEFAULT_REGION_THRESHOLD,
            stopping_force_n: Some(8.4e-13),
            stopping_distance_m: Some(1.9e-6),
            stopping_mass_kg: Some(2.2e-17),
        }
    }
}

impl RecaptureSettings {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (k, x) in [
            ("throw_height_m", self.throw_height_m),
            ("return_speed_m_s", self.return_speed_m_s),
            ("particle_diameter_nm", self.particle_diameter_nm),
            ("window_um", self.window_um),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("recapture.{k} must be positive (got {x})"));
            }
        }
        if self.points < 3 {
            v.push("recapture.points must be >= 3".into());
        }
        if !(self.region_threshold > 0.0 && self.region_threshold < 1.0) {
            v.push("recapture.region_threshold must lie in (0, 1)".into());
        }
        let set = [self.stopping_force_n, self.stopping_distance_m, self.stopping_mass_kg]
            .iter()
            .filter(|x| x.is_some())
            .count();
        if set != 0 && set != 3 {
            v.push("recapture: stopping_force_n, stopping_distance_m and stopping_mass_kg go together".into());
        }
        v
    }

    fn baseline(&self) -> Option<(f64, f64, f64)> {
        Some((self.stopping_force_n?, self.stopping_distance_m?, self.stopping_mass_kg?))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecaptureReport {
    pub particle: ParticleSpec,
    pub transverse: TransverseConstraint,
    pub axial: AxialForceProfile,
    /// From the computed profile.
    pub profile_v_max: f64,
    /// From the configured average force, distance and mass, when given.
    pub baseline_v_max: Option<f64>,
    pub return_speed: f64,
    pub required_power: f64,
    pub ground_state_temperature: f64,
    /// At the transverse temperature bound, m.
    pub rms_displacement: f64,
}

/// Every recapture quantity for the configured trap and a sphere of the configured diameter.
pub fn recapture_report(
    settings: &RecaptureSettings,
    trap: &TrapSpec,
    template: &ParticleSpec,
) -> Result<RecaptureReport> {
    let v = settings.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let particle = ParticleSpec::from_radius(
        0.5 * settings.particle_diameter_nm * 1e-9,
        template.density,
        template.refractive_index,
    )?;
    let particle = ParticleSpec { absorption_cross_section_trap: template.absorption_cross_section_trap, ..particle };
    let transverse = transverse_constraint(settings.throw_height_m, trap, &particle)?;
    let axial = axial_forces(trap, &particle, settings.window_um * 1e-6, settings.points, settings.region_threshold)?;
    let profile_v_max = axial.max_stoppable_velocity()?;
    let baseline_v_max = settings.baseline().map(|(f, d, m)| max_stoppable_velocity(f, d, m)).transpose()?;
    let required_power =
        required_power_from(settings.return_speed_m_s, trap.power, baseline_v_max.unwrap_or(profile_v_max))?;
    Ok(RecaptureReport {
        transverse,
        profile_v_max,
        baseline_v_max,
        return_speed: settings.return_speed_m_s,
        required_power,
        ground_state_temperature: ground_state_temperature(trap.trap_frequency)?,
        rms_displacement: rms_displacement(transverse.t_max, particle.mass, 2.0 * PI * trap.trap_frequency)?,
        axial,
        particle,
    })
}

/// The `[reentry]` section of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReentrySettings {
    pub true_entry_nm: f64,
    /// Defaults to the free-fall speed gained while the trap is off.
    pub entry_velocity_m_s: Option<f64>,
    /// Defaults to the trap frequency.
    pub frequency_khz: Option<f64>,
    /// Energy damping rate of the trapped motion, s^-1.
    pub damping_rate_hz: f64,
    pub noise_nm_per_rt_hz: f64,
    pub sample_rate_khz: f64,
    pub window_ms: f64,
    /// Time the trap stays off, ms.
    pub trap_off_ms: f64,
    /// Half-width of the band-pass as a fraction of the trap frequency.
    pub band_fraction: f64,
    pub filter_order: u32,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ReentrySettings {
    fn default() -> Self {
        ReentrySettings {
            true_entry_nm: 100.0,
            entry_velocity_m_s: None,
            frequency_khz: None,
            damping_rate_hz: 1.0,
            noise_nm_per_rt_hz: 1.0,
            sample_rate_khz: 250.0,
            window_ms: 40.0,
            trap_off_ms: 0.05,
            band_fraction: 0.3,
            filter_order: 4,
            trials: 500,
            seed: 7,
        }
    }
}

impl ReentrySettings {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (k, x) in [
            ("sample_rate_khz", self.sample_rate_khz),
            ("window_ms", self.window_ms),
            ("band_fraction", self.band_fraction),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("reentry.{k} must be positive (got {x})"));
            }
        }
        for (k, x) in [
            ("damping_rate_hz", self.damping_rate_hz),
            ("noise_nm_per_rt_hz", self.noise_nm_per_rt_hz),
            ("trap_off_ms", self.trap_off_ms),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                v.push(format!("reentry.{k} must be >= 0 (got {x})"));
            }
        }
        if self.band_fraction >= 1.0 {
            v.push("reentry.band_fraction must be below 1".into());
        }
        if self.filter_order < 1 {
            v.push("reentry.filter_order must be >= 1".into());
        }
        if self.trials < 1 {
            v.push("reentry.trials must be >= 1".into());
        }
        if let Some(f) = self.frequency_khz {
            if !(f > 0.0) {
                v.push("reentry.frequency_khz must be positive".into());
            }
        }
        v
    }

    /// Oscillator and measurement parameters in SI, with the trap frequency as fallback.
    pub fn params(&self, trap: &TrapSpec) -> ReentryParams {
        let t_off = self.trap_off_ms * 1e-3;
        ReentryParams {
            true_entry: self.true_entry_nm * 1e-9,
            entry_velocity: self.entry_velocity_m_s.unwrap_or(-GRAVITY * t_off),
            frequency: self.frequency_khz.map_or(trap.trap_frequency, |f| f * 1e3),
            damping_rate: self.damping_rate_hz,
            noise_density: self.noise_nm_per_rt_hz * 1e-9,
            sample_rate: self.sample_rate_khz * 1e3,
            window: self.window_ms * 1e-3,
            trap_on_time: t_off,
            band_fraction: self.band_fraction,
            filter_order: self.filter_order,
        }
    }
}
