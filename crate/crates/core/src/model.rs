//! Physical parameters of the interferometer and the quantities derived from them.
//!
//! Everything is stored in SI units. Conversions from laboratory units (amu, mbar,
//! nm, mK) happen in [`crate::config`] and nowhere else.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod units;

/// CODATA 2018 exact and recommended values.
pub mod constants {
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
    /// Fixed local gravitational acceleration used for every ballistic computation.
    pub const GRAVITY: f64 = 9.81;
}

use constants::*;

/// Bulk density used for silica unless a configuration overrides it.
pub const DEFAULT_SILICA_DENSITY: f64 = 1850.0;

/// Refractive index of silica assumed at the 213 nm grating wavelength.
pub const DEFAULT_GRATING_INDEX: f64 = 1.54;

/// Radius of a homogeneous sphere with the given mass and density.
pub fn derive_radius(mass: f64, density: f64) -> Result<f64> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::domain(format!("mass must be positive, got {mass}")));
    }
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::domain(format!("density must be positive, got {density}")));
    }
    Ok((3.0 * mass / (4.0 * PI * density)).cbrt())
}

/// Clausius-Mossotti factor (n^2 - 1)/(n^2 + 2).
pub fn clausius_mossotti(refractive_index: Complex64) -> Complex64 {
    let eps = refractive_index * refractive_index;
    (eps - 1.0) / (eps + 2.0)
}

/// The levitated nanosphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSpec {
    /// kg
    pub mass: f64,
    /// kg m^-3
    pub density: f64,
    /// m
    pub radius: f64,
    /// Complex refractive index at the grating wavelength.
    pub refractive_index: Complex64,
    /// Absorption cross-section at the trap wavelength, m^2.
    pub absorption_cross_section_trap: f64,
}

impl ParticleSpec {
    /// Sphere whose radius follows from mass and density.
    pub fn from_mass(mass: f64, density: f64, refractive_index: Complex64) -> Result<Self> {
        let radius = derive_radius(mass, density)?;
        let p = ParticleSpec { mass, density, radius, refractive_index, absorption_cross_section_trap: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn from_radius(radius: f64, density: f64, refractive_index: Complex64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::domain(format!("radius must be positive, got {radius}")));
        }
        let mass = density * 4.0 / 3.0 * PI * radius.powi(3);
        let p = ParticleSpec { mass, density, radius, refractive_index, absorption_cross_section_trap: 0.0 };
        p.validate()?;
        Ok(p)
    }

    /// Silica sphere of the given mass in atomic mass units.
    pub fn silica_amu(mass_amu: f64) -> Result<Self> {
        Self::from_mass(mass_amu * ATOMIC_MASS_UNIT, DEFAULT_SILICA_DENSITY, Complex64::new(DEFAULT_GRATING_INDEX, 0.0))
    }

    /// Same material and density, different mass (radius re-derived).
    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        let mut p = Self::from_mass(mass, self.density, self.refractive_index)?;
        p.absorption_cross_section_trap = self.absorption_cross_section_trap;
        Ok(p)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.radius > 0.0) {
            v.push(format!("particle.radius must be > 0 (got {})", self.radius));
        }
        if !(self.density > 0.0) {
            v.push(format!("particle.density must be > 0 (got {})", self.density));
        }
        if !(self.mass > 0.0) {
            v.push(format!("particle.mass must be > 0 (got {})", self.mass));
        }
        if self.refractive_index.im < 0.0 {
            v.push(format!("particle.refractive_index imaginary part must be >= 0 (got {})", self.refractive_index.im));
        }
        if self.absorption_cross_section_trap < 0.0 {
            v.push("particle.absorption_cross_section_trap must be >= 0".into());
        }
        if v.is_empty() {
            let expected = self.density * self.volume();
            if ((self.mass - expected) / expected).abs() > 1e-9 {
                v.push(format!("particle.mass {} inconsistent with density * volume {}", self.mass, expected));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }

    /// Static polarizability from the Clausius-Mossotti relation, C m^2 V^-1.
    pub fn polarizability(&self) -> Complex64 {
        4.0 * PI * VACUUM_PERMITTIVITY * self.radius.powi(3) * clausius_mossotti(self.refractive_index)
    }

    pub fn static_polarizability_real(&self) -> f64 {
        self.polarizability().re
    }

    /// Size parameter kR at the given vacuum wavelength.
    pub fn size_parameter(&self, wavelength: f64) -> f64 {
        2.0 * PI / wavelength * self.radius
    }
}

/// The pulsed standing-wave phase grating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GratingSpec {
    /// Grating laser wavelength, m.
    pub wavelength: f64,
    /// Pulse energy, J.
    pub pulse_energy: f64,
    /// Spot area, m^2.
    pub spot_area: f64,
    /// Pulse duration, s. Only used to derive a field amplitude.
    pub pulse_duration: f64,
    /// Peak standing-wave field amplitude, V m^-1.
    pub field_amplitude: f64,
}

impl GratingSpec {
    /// Grating whose peak field follows from a square pulse of the given duration.
    pub fn new(wavelength: f64, pulse_energy: f64, spot_area: f64, pulse_duration: f64) -> Result<Self> {
        let mut g = GratingSpec { wavelength, pulse_energy, spot_area, pulse_duration, field_amplitude: 0.0 };
        g.field_amplitude = g.derived_field_amplitude();
        g.validate()?;
        Ok(g)
    }

    /// Standing-wave antinode amplitude: twice the single-beam amplitude of intensity E_G/(a_G tau).
    pub fn derived_field_amplitude(&self) -> f64 {
        if self.pulse_duration <= 0.0 || self.spot_area <= 0.0 {
            return 0.0;
        }
        let intensity = self.pulse_energy / (self.spot_area * self.pulse_duration);
        2.0 * (2.0 * intensity / (SPEED_OF_LIGHT * VACUUM_PERMITTIVITY)).sqrt()
    }

    /// Returns a copy with a new pulse energy; the field amplitude is re-derived.
    pub fn with_pulse_energy(&self, pulse_energy: f64) -> Self {
        let mut g = self.clone();
        g.pulse_energy = pulse_energy;
        g.field_amplitude = g.derived_field_amplitude();
        g
    }

    /// Grating period d = lambda/2.
    pub fn period(&self) -> f64 {
        self.wavelength / 2.0
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn angular_frequency(&self) -> f64 {
        SPEED_OF_LIGHT * self.wavenumber()
    }

    /// Photons per unit area carried by one of the two counter-propagating beams.
    pub fn photon_fluence(&self) -> f64 {
        self.pulse_energy / (self.spot_area * HBAR * self.angular_frequency())
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.wavelength > 0.0) {
            v.push(format!("grating.wavelength must be > 0 (got {})", self.wavelength));
        }
        if !(self.pulse_energy >= 0.0) {
            v.push(format!("grating.pulse_energy must be >= 0 (got {})", self.pulse_energy));
        }
        if !(self.spot_area > 0.0) {
            v.push(format!("grating.spot_area must be > 0 (got {})", self.spot_area));
        }
        if !(self.pulse_duration > 0.0) {
            v.push(format!("grating.pulse_duration must be > 0 (got {})", self.pulse_duration));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// The optical tweezer that launches and recaptures the particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec {
    pub wavelength: f64,
    /// W
    pub power: f64,
    /// Focal waist used for the transverse barrier, m.
    pub waist: f64,
    pub numerical_aperture: f64,
    /// Mechanical frequency along the grating axis, Hz.
    pub trap_frequency: f64,
}

impl TrapSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.wavelength > 0.0) {
            v.push("trap.wavelength must be > 0".into());
        }
        if !(self.power > 0.0) {
            v.push(format!("trap.power must be > 0 (got {})", self.power));
        }
        if !(self.waist > 0.0) {
            v.push(format!("trap.waist must be > 0 (got {})", self.waist));
        }
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture <= 1.0) {
            v.push(format!("trap.numerical_aperture must lie in (0, 1] (got {})", self.numerical_aperture));
        }
        if !(self.trap_frequency > 0.0) {
            v.push("trap.trap_frequency must be > 0".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Paraxial waist of a beam focused at this numerical aperture.
    pub fn paraxial_waist(&self) -> f64 {
        self.wavelength / (PI * self.numerical_aperture)
    }

    pub fn with_power(&self, power: f64) -> Self {
        TrapSpec { power, ..self.clone() }
    }
}

/// Spatial resolution function f(x) of a decoherence channel.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Resolution {
    /// f = 0 for x != 0: every event fully resolves the two paths.
    Complete,
    /// f(x) = exp(-x^2 / (2 length^2)).
    Gaussian { length: f64 },
    /// User supplied; not serializable.
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Resolution {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Resolution::Complete => {
                if x == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Resolution::Gaussian { length } => (-x * x / (2.0 * length * length)).exp(),
            Resolution::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Complete => write!(f, "Complete"),
            Resolution::Gaussian { length } => write!(f, "Gaussian {{ length: {length:e} }}"),
            Resolution::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// One environmental decoherence process with rate and spatial resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecoherenceChannel {
    pub name: String,
    /// Events per second.
    pub rate: f64,
    pub resolution: Resolution,
    /// Where the rate came from, echoed into pattern metadata.
    #[serde(default)]
    pub provenance: String,
}

impl DecoherenceChannel {
    pub fn new(name: impl Into<String>, rate: f64, resolution: Resolution) -> Self {
        DecoherenceChannel { name: name.into(), rate, resolution, provenance: String::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    /// Pa
    pub gas_pressure: f64,
    /// K
    pub gas_temperature: f64,
    pub internal_temperature: f64,
    pub environment_temperature: f64,
    pub decoherence_channels: Vec<DecoherenceChannel>,
}

impl EnvironmentSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, value) in [
            ("environment.gas_pressure", self.gas_pressure),
            ("environment.gas_temperature", self.gas_temperature),
            ("environment.internal_temperature", self.internal_temperature),
            ("environment.environment_temperature", self.environment_temperature),
        ] {
            if !(value >= 0.0) {
                v.push(format!("{name} must be >= 0 (got {value})"));
            }
        }
        for c in &self.decoherence_channels {
            if !(c.rate >= 0.0) {
                v.push(format!("decoherence channel '{}' has negative rate {}", c.name, c.rate));
            }
        }
        v
    }
}

/// Timing of one throw: free flight up to the grating and back down to the trap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    /// Launch to grating pulse, s.
    pub t1: f64,
    /// Grating pulse to detection, s.
    pub t2: f64,
    /// Apex height above the trap, m.
    pub throw_height: f64,
    /// Vertical launch speed, m s^-1.
    pub launch_velocity: f64,
    pub kick_error_relative_sigma: f64,
    /// Centre-of-mass temperature along the grating axis, K.
    pub initial_temperature: f64,
}

impl FlightPlan {
    /// Vertical throw at speed v0 with the grating pulse at the apex.
    pub fn ballistic(launch_velocity: f64, initial_temperature: f64) -> Result<Self> {
        if !(launch_velocity > 0.0) {
            return Err(Error::domain(format!("launch velocity must be positive, got {launch_velocity}")));
        }
        let t = launch_velocity / GRAVITY;
        Ok(FlightPlan {
            t1: t,
            t2: t,
            throw_height: launch_velocity * launch_velocity / (2.0 * GRAVITY),
            launch_velocity,
            kick_error_relative_sigma: 0.0,
            initial_temperature,
        })
    }

    /// Ballistic throw whose total flight time t1 + t2 equals `total`.
    pub fn from_total_time(total: f64, initial_temperature: f64) -> Result<Self> {
        Self::ballistic(GRAVITY * total / 2.0, initial_temperature)
    }

    pub fn total_time(&self) -> f64 {
        self.t1 + self.t2
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.t1 > 0.0) {
            v.push(format!("flight.t1 must be > 0 (got {})", self.t1));
        }
        if !(self.t2 > 0.0) {
            v.push(format!("flight.t2 must be > 0 (got {})", self.t2));
        }
        if !(self.initial_temperature >= 0.0) {
            v.push("flight.initial_temperature must be >= 0".into());
        }
        if !(self.kick_error_relative_sigma >= 0.0) {
            v.push("flight.kick_error_relative_sigma must be >= 0".into());
        }
        v
    }

    /// Thermal position spread sqrt(kB T / (4 pi^2 m nu^2)).
    pub fn sigma_x(&self, particle: &ParticleSpec, trap: &TrapSpec) -> f64 {
        (BOLTZMANN * self.initial_temperature / (4.0 * PI * PI * particle.mass * trap.trap_frequency.powi(2))).sqrt()
    }

    /// Thermal momentum spread sqrt(m kB T).
    pub fn sigma_p(&self, particle: &ParticleSpec) -> f64 {
        (particle.mass * BOLTZMANN * self.initial_temperature).sqrt()
    }

    /// Coherence requirements on the initial state.
    pub fn source_conditions(
        &self,
        particle: &ParticleSpec,
        grating: &GratingSpec,
        trap: &TrapSpec,
    ) -> SourceConditions {
        let d = grating.period();
        let size_ratio = self.sigma_x(particle, trap) / d;
        let momentum_ratio = self.sigma_p(particle) * d / PLANCK;
        SourceConditions { size_ratio, momentum_ratio, satisfied: size_ratio < 1.0 && momentum_ratio > 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceConditions {
    /// sigma_x / d, must be below one.
    pub size_ratio: f64,
    /// sigma_p d / h, must be much larger than one.
    pub momentum_ratio: f64,
    pub satisfied: bool,
}

/// Talbot time m d^2 / h.
pub fn talbot_time(particle: &ParticleSpec, grating: &GratingSpec) -> f64 {
    particle.mass * grating.period().powi(2) / PLANCK
}
