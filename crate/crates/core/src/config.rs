//! Configuration documents, shipped presets and the conversion from laboratory units to SI.
//!
//! A document is a TOML tree. Keys carry their unit in the name (`mass_amu`, `pressure_mbar`,
//! `wavelength_nm`, ...); everything downstream of [`Config`] is SI. A document may name a preset in
//! `experiment.preset`; its own keys and any `--set` overrides are layered on top.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::mie::{
    mean_absorbed_photons, mean_scattered_photons, mie_solve, phase_modulation, pulse_energy_for_phase,
    GratingDecoherenceKernel, MieSolution, PhaseModulation, Regime, DEFAULT_THETA_NODES,
};
use crate::model::constants::ATOMIC_MASS_UNIT;
use crate::model::{
    clausius_mossotti, talbot_time, DecoherenceChannel, EnvironmentSpec, FlightPlan, GratingSpec, ParticleSpec,
    Resolution, SourceConditions, TrapSpec, DEFAULT_GRATING_INDEX, DEFAULT_SILICA_DENSITY,
};
use crate::recapture::{RecaptureSettings, ReentrySettings};
use crate::stochastic::PhasePolicy;
use crate::talbot::{
    blackbody_scattering_channel, fringe_pattern, gas_collision_channel, FringeOptions, FringePattern, GratingKernel,
    Grid, Mode, PatternInputs, VisibilityMethod, NITROGEN_MASS,
};

/// Presets shipped with the library, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("silica-1e6", include_str!("../presets/silica-1e6.toml")),
    ("silica-1e8", include_str!("../presets/silica-1e8.toml")),
];

/// Keys of which at most one may be set; an overlay that sets one clears the others.
const EXCLUSIVE: &[(&str, &[&str])] = &[
    ("particle", &["mass_amu", "mass_kg", "radius_nm"]),
    ("grating", &["phi0", "pulse_energy_j"]),
    ("flight", &["total_time_ms", "launch_velocity_m_s", "throw_height_m", "t1_ms"]),
];

const MBAR: f64 = 100.0;
const NM: f64 = 1e-9;
const MS: f64 = 1e-3;

/// What a run computes when no subcommand is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Pattern,
    SweepPhi,
    SweepTime,
    KickError,
    MassSpread,
    Recapture,
    Reentry,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Pattern,
        Experiment::SweepPhi,
        Experiment::SweepTime,
        Experiment::KickError,
        Experiment::MassSpread,
        Experiment::Recapture,
        Experiment::Reentry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Pattern => "pattern",
            Experiment::SweepPhi => "sweep-phi",
            Experiment::SweepTime => "sweep-time",
            Experiment::KickError => "kick-error",
            Experiment::MassSpread => "mass-spread",
            Experiment::Recapture => "recapture",
            Experiment::Reentry => "reentry",
        }
    }

    pub fn parse(s: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.as_str() == s)
    }
}

// ---------------------------------------------------------------------------------------------
// Document schema in laboratory units

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    particle: RawParticle,
    grating: RawGrating,
    trap: RawTrap,
    environment: RawEnvironment,
    flight: RawFlight,
    model: RawModel,
    sweep: RawSweep,
    ensemble: RawEnsemble,
    recapture: RecaptureSettings,
    reentry: ReentrySettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawExperiment {
    kind: Experiment,
    preset: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawParticle {
    mass_amu: Option<f64>,
    mass_kg: Option<f64>,
    radius_nm: Option<f64>,
    density_kg_m3: f64,
    refractive_index: [f64; 2],
    trap_absorption_cross_section_m2: f64,
}

impl Default for RawParticle {
    fn default() -> Self {
        RawParticle {
            mass_amu: None,
            mass_kg: None,
            radius_nm: None,
            density_kg_m3: DEFAULT_SILICA_DENSITY,
            refractive_index: [DEFAULT_GRATING_INDEX, 0.0],
            trap_absorption_cross_section_m2: 0.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGrating {
    wavelength_nm: f64,
    phi0: Option<f64>,
    pulse_energy_j: Option<f64>,
    spot_area_um2: f64,
    pulse_duration_ns: f64,
}

impl Default for RawGrating {
    fn default() -> Self {
        RawGrating {
            wavelength_nm: 213.0,
            phi0: None,
            pulse_energy_j: None,
            spot_area_um2: PI * 400.0,
            pulse_duration_ns: 10.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTrap {
    wavelength_nm: f64,
    power_w: f64,
    /// Defaults to the diffraction-limited lambda / (2 NA).
    waist_nm: Option<f64>,
    numerical_aperture: f64,
    frequency_khz: f64,
}

impl Default for RawTrap {
    fn default() -> Self {
        RawTrap { wavelength_nm: 1550.0, power_w: 0.1, waist_nm: None, numerical_aperture: 1.0, frequency_khz: 50.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawEnvironment {
    pressure_mbar: f64,
    gas_temperature_k: f64,
    internal_temperature_k: f64,
    environment_temperature_k: f64,
    gas_mass_amu: f64,
    gas_collisions: bool,
    blackbody_scattering: bool,
    channels: Vec<RawChannel>,
}

impl Default for RawEnvironment {
    fn default() -> Self {
        RawEnvironment {
            pressure_mbar: 1e-10,
            gas_temperature_k: 300.0,
            internal_temperature_k: 300.0,
            environment_temperature_k: 300.0,
            gas_mass_amu: NITROGEN_MASS / ATOMIC_MASS_UNIT,
            gas_collisions: true,
            blackbody_scattering: true,
            channels: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    name: String,
    rate_hz: f64,
    /// "complete" or "gaussian"
    #[serde(default = "complete")]
    resolution: String,
    length_nm: Option<f64>,
}

fn complete() -> String {
    "complete".into()
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawFlight {
    total_time_ms: Option<f64>,
    launch_velocity_m_s: Option<f64>,
    throw_height_m: Option<f64>,
    t1_ms: Option<f64>,
    t2_ms: Option<f64>,
    temperature_mk: f64,
    kick_error: f64,
}

impl Default for RawFlight {
    fn default() -> Self {
        RawFlight {
            total_time_ms: None,
            launch_velocity_m_s: None,
            throw_height_m: None,
            t1_ms: None,
            t2_ms: None,
            temperature_mk: 1.0,
            kick_error: 0.0,
        }
    }
}

/// Numerical and physical switches of the fringe model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    /// How the phase modulation is computed.
    pub regime: Regime,
    /// Allow the point-dipole phase beyond its range of validity.
    pub force_rayleigh: bool,
    /// Decoherence from scattered and absorbed grating photons.
    pub grating_photons: bool,
    pub decohere_classical: bool,
    pub order: usize,
    pub visibility: VisibilityMethod,
    pub grid_periods: usize,
    pub points_per_period: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            regime: Regime::Mie,
            force_rayleigh: false,
            grating_photons: true,
            decohere_classical: false,
            order: crate::talbot::DEFAULT_ORDER,
            visibility: VisibilityMethod::MaxMinCentralPeriod,
            grid_periods: 4,
            points_per_period: 200,
        }
    }
}

type RawModel = ModelOptions;

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSweep {
    phi0_min: f64,
    phi0_max: f64,
    phi0_steps: usize,
    time_min_ms: f64,
    time_max_ms: f64,
    time_steps: usize,
}

impl Default for RawSweep {
    fn default() -> Self {
        RawSweep {
            phi0_min: 0.0,
            phi0_max: 8.0 * PI,
            phi0_steps: 41,
            time_min_ms: 10.0,
            time_max_ms: 300.0,
            time_steps: 59,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawEnsemble {
    samples: usize,
    seed: u64,
    kick_errors: Vec<f64>,
    mass_spreads: Vec<f64>,
    phase_policy: PhasePolicy,
}

impl Default for RawEnsemble {
    fn default() -> Self {
        RawEnsemble {
            samples: 2000,
            seed: 1,
            kick_errors: vec![0.0, 0.1, 0.2, 0.3],
            mass_spreads: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            phase_policy: PhasePolicy::Resample,
        }
    }
}

// ---------------------------------------------------------------------------------------------
// Resolved configuration

/// Where the grating strength comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSource {
    /// Pulse energy solved so the base particle sees this phi0.
    Target(f64),
    /// Fixed pulse energy, J.
    PulseEnergy(f64),
}

/// Built-in decoherence channels that depend on the particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelPresets {
    pub gas_collisions: bool,
    pub blackbody_scattering: bool,
    /// Residual gas molecule mass, kg.
    pub gas_mass: f64,
}

/// Everything needed to compute a fringe pattern, in SI units.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub particle: ParticleSpec,
    /// Pulse energy is a placeholder when `phase` is a target.
    pub grating: GratingSpec,
    pub phase: PhaseSource,
    pub trap: TrapSpec,
    pub environment: EnvironmentSpec,
    pub presets: ChannelPresets,
    pub flight: FlightPlan,
    pub model: ModelOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSettings {
    pub phi0_min: f64,
    pub phi0_max: f64,
    pub phi0_steps: usize,
    /// s
    pub time_min: f64,
    /// s
    pub time_max: f64,
    pub time_steps: usize,
}

impl SweepSettings {
    pub fn phi0_values(&self) -> Vec<f64> {
        linspace(self.phi0_min, self.phi0_max, self.phi0_steps)
    }

    pub fn time_values(&self) -> Vec<f64> {
        linspace(self.time_min, self.time_max, self.time_steps)
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.phi0_max > self.phi0_min && self.phi0_min >= 0.0) || self.phi0_steps < 2 {
            v.push(format!(
                "sweep: phi0 range [{}, {}] with {} steps is empty",
                self.phi0_min, self.phi0_max, self.phi0_steps
            ));
        }
        if !(self.time_max > self.time_min && self.time_min > 0.0) || self.time_steps < 2 {
            v.push(format!(
                "sweep: time range [{} ms, {} ms] with {} steps is empty",
                self.time_min / MS,
                self.time_max / MS,
                self.time_steps
            ));
        }
        v
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSettings {
    pub samples: usize,
    pub seed: u64,
    pub kick_errors: Vec<f64>,
    pub mass_spreads: Vec<f64>,
    pub phase_policy: PhasePolicy,
}

impl EnsembleSettings {
    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.samples < 1 {
            v.push("ensemble.samples must be >= 1".into());
        }
        for (key, list) in [("kick_errors", &self.kick_errors), ("mass_spreads", &self.mass_spreads)] {
            if list.is_empty() {
                v.push(format!("ensemble.{key} must not be empty"));
            }
            if list.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                v.push(format!("ensemble.{key} must be finite and >= 0"));
            }
        }
        v
    }
}

/// A parsed and validated configuration document.
#[derive(Debug, Clone)]
pub struct Config {
    pub experiment: Experiment,
    pub scenario: Scenario,
    pub sweep: SweepSettings,
    pub ensemble: EnsembleSettings,
    pub recapture: RecaptureSettings,
    pub reentry: ReentrySettings,
    document: Table,
}

impl Config {
    /// Parses a document, layering it over its preset and applying `key=value` overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Config> {
        let user: Table = text.parse().map_err(|e: toml::de::Error| Error::Validation(vec![e.to_string()]))?;
        Config::from_table(user, overrides)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::parse(&text, overrides)
    }

    /// A shipped preset with overrides.
    pub fn preset(name: &str, overrides: &[String]) -> Result<Config> {
        Config::parse(&format!("[experiment]\npreset = {:?}\n", name), overrides)
    }

    pub fn from_table(mut user: Table, overrides: &[String]) -> Result<Config> {
        for o in overrides {
            apply_override(&mut user, o)?;
        }
        let preset = user
            .get("experiment")
            .and_then(|e| e.get("preset"))
            .map(|p| p.as_str().map(str::to_owned).ok_or_else(|| invalid("experiment.preset must be a string")))
            .transpose()?;
        let mut document = match preset {
            Some(name) => {
                let text = PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
                    let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
                    invalid(format!("unknown preset {name:?}; available: {}", names.join(", ")))
                })?;
                let mut base: Table = text.parse().expect("shipped presets parse");
                merge(&mut base, user);
                base
            }
            None => user,
        };
        if let Some(Value::Table(e)) = document.get_mut("experiment") {
            e.remove("preset");
        }
        let raw: RawConfig =
            document.clone().try_into().map_err(|e: toml::de::Error| Error::Validation(vec![e.to_string()]))?;
        let config = resolve(raw, document)?;
        Ok(config)
    }

    /// The fully merged document, without the preset reference. Re-parsing it yields the same
    /// configuration.
    pub fn document(&self) -> &Table {
        &self.document
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.document).expect("a parsed document serializes")
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(vec![msg.into()])
}

/// Applies `a.b.c=value`; the value is read as a TOML literal, or as a bare string if it is not one.
pub fn apply_override(doc: &mut Table, assignment: &str) -> Result<()> {
    let (path, literal) = assignment
        .split_once('=')
        .ok_or_else(|| invalid(format!("override {assignment:?} is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(invalid(format!("override {assignment:?} has an empty key")));
    }
    let literal = literal.trim();
    let value = format!("v = {literal}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(literal.to_string()));
    let (last, parents) = keys.split_last().expect("at least one key");
    let mut table = &mut *doc;
    for k in parents {
        let entry = table.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = entry.as_table_mut().ok_or_else(|| invalid(format!("override {assignment:?}: {k} is not a table")))?;
    }
    if let [section] = parents {
        clear_exclusive(table, section, last);
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn clear_exclusive(table: &mut Table, section: &str, key: &str) {
    for (s, group) in EXCLUSIVE {
        if *s == section && group.contains(&key) {
            for other in group.iter().filter(|g| **g != key) {
                table.remove(*other);
            }
            if key != "t1_ms" {
                table.remove("t2_ms");
            }
        }
    }
}

/// Deep merge of `overlay` into `base`.
fn merge(base: &mut Table, overlay: Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => {
                for k in o.keys() {
                    clear_exclusive(b, &key, k);
                }
                merge(b, o);
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn resolve(raw: RawConfig, document: Table) -> Result<Config> {
    let mut v = Vec::new();

    let p = &raw.particle;
    let index = Complex64::new(p.refractive_index[0], p.refractive_index[1]);
    let given: Vec<&str> = [("mass_amu", p.mass_amu), ("mass_kg", p.mass_kg), ("radius_nm", p.radius_nm)]
        .iter()
        .filter(|(_, x)| x.is_some())
        .map(|(n, _)| *n)
        .collect();
    let particle = match (given.len(), p.mass_amu, p.mass_kg, p.radius_nm) {
        (1, Some(amu), _, _) => ParticleSpec::from_mass(amu * ATOMIC_MASS_UNIT, p.density_kg_m3, index),
        (1, _, Some(kg), _) => ParticleSpec::from_mass(kg, p.density_kg_m3, index),
        (1, _, _, Some(r)) => ParticleSpec::from_radius(r * NM, p.density_kg_m3, index),
        (0, ..) => Err(invalid("particle: one of mass_amu, mass_kg, radius_nm is required")),
        _ => Err(invalid(format!("particle: {} are mutually exclusive", given.join(", ")))),
    };
    let particle = match particle {
        Ok(mut particle) => {
            particle.absorption_cross_section_trap = p.trap_absorption_cross_section_m2;
            v.extend(particle.violations().into_iter().map(|m| format!("particle: {m}")));
            Some(particle)
        }
        Err(Error::Validation(m)) => {
            v.extend(m);
            None
        }
        Err(e) => {
            v.push(format!("particle: {e}"));
            None
        }
    };

    let g = &raw.grating;
    let phase = match (g.phi0, g.pulse_energy_j) {
        (Some(phi0), None) => {
            if !(phi0 >= 0.0 && phi0.is_finite()) {
                v.push(format!("grating.phi0 must be finite and >= 0 (got {phi0})"));
            }
            PhaseSource::Target(phi0)
        }
        (None, Some(e)) => PhaseSource::PulseEnergy(e),
        (None, None) => {
            v.push("grating: one of phi0, pulse_energy_j is required".into());
            PhaseSource::Target(0.0)
        }
        (Some(_), Some(_)) => {
            v.push("grating: phi0 and pulse_energy_j are mutually exclusive".into());
            PhaseSource::Target(0.0)
        }
    };
    let grating = GratingSpec {
        wavelength: g.wavelength_nm * NM,
        pulse_energy: match phase {
            PhaseSource::PulseEnergy(e) => e,
            PhaseSource::Target(_) => 0.0,
        },
        spot_area: g.spot_area_um2 * 1e-12,
        pulse_duration: g.pulse_duration_ns * 1e-9,
        field_amplitude: 0.0,
    };
    let grating = grating.with_pulse_energy(grating.pulse_energy);
    v.extend(grating.violations());

    let t = &raw.trap;
    let trap = TrapSpec {
        wavelength: t.wavelength_nm * NM,
        power: t.power_w,
        waist: t.waist_nm.map(|w| w * NM).unwrap_or(t.wavelength_nm * NM / (2.0 * t.numerical_aperture)),
        numerical_aperture: t.numerical_aperture,
        trap_frequency: t.frequency_khz * 1e3,
    };
    v.extend(trap.violations());

    let e = &raw.environment;
    let mut channels = Vec::new();
    for c in &e.channels {
        let resolution = match (c.resolution.as_str(), c.length_nm) {
            ("complete", None) => Resolution::Complete,
            ("gaussian", Some(l)) if l > 0.0 => Resolution::Gaussian { length: l * NM },
            ("gaussian", _) => {
                v.push(format!("environment.channels {:?}: gaussian resolution needs length_nm > 0", c.name));
                continue;
            }
            (other, _) => {
                v.push(format!(
                    "environment.channels {:?}: resolution {other:?} must be \"complete\" (without length_nm) or \"gaussian\"",
                    c.name
                ));
                continue;
            }
        };
        if !(c.rate_hz >= 0.0) {
            v.push(format!("environment.channels {:?}: rate_hz must be >= 0", c.name));
        }
        let mut channel = DecoherenceChannel::new(c.name.clone(), c.rate_hz, resolution);
        channel.provenance = "configured".into();
        channels.push(channel);
    }
    let environment = EnvironmentSpec {
        gas_pressure: e.pressure_mbar * MBAR,
        gas_temperature: e.gas_temperature_k,
        internal_temperature: e.internal_temperature_k,
        environment_temperature: e.environment_temperature_k,
        decoherence_channels: channels,
    };
    v.extend(environment.violations());
    if !(e.gas_mass_amu > 0.0) {
        v.push("environment.gas_mass_amu must be > 0".into());
    }
    let presets = ChannelPresets {
        gas_collisions: e.gas_collisions,
        blackbody_scattering: e.blackbody_scattering,
        gas_mass: e.gas_mass_amu * ATOMIC_MASS_UNIT,
    };

    let f = &raw.flight;
    let temperature = f.temperature_mk * 1e-3;
    let flight = match (f.total_time_ms, f.launch_velocity_m_s, f.throw_height_m, f.t1_ms, f.t2_ms) {
        (Some(total), None, None, None, None) => FlightPlan::from_total_time(total * MS, temperature),
        (None, Some(v0), None, None, None) => FlightPlan::ballistic(v0, temperature),
        (None, None, Some(h), None, None) => {
            FlightPlan::ballistic((2.0 * crate::model::constants::GRAVITY * h.max(0.0)).sqrt(), temperature)
        }
        (None, None, None, Some(t1), Some(t2)) => {
            let g = crate::model::constants::GRAVITY;
            Ok(FlightPlan {
                t1: t1 * MS,
                t2: t2 * MS,
                throw_height: 0.5 * g * (t1 * MS).powi(2),
                launch_velocity: g * t1 * MS,
                kick_error_relative_sigma: 0.0,
                initial_temperature: temperature,
            })
        }
        _ => Err(invalid(
            "flight: give exactly one of total_time_ms, launch_velocity_m_s, throw_height_m, or both t1_ms and t2_ms",
        )),
    };
    let flight = match flight {
        Ok(mut flight) => {
            flight.kick_error_relative_sigma = f.kick_error;
            v.extend(flight.violations());
            Some(flight)
        }
        Err(Error::Validation(m)) => {
            v.extend(m);
            None
        }
        Err(e) => {
            v.push(format!("flight: {e}"));
            None
        }
    };

    let model = raw.model;
    if model.order < 1 || model.order > crate::talbot::MAX_ORDER {
        v.push(format!("model.order must lie in 1..={}", crate::talbot::MAX_ORDER));
    }
    if model.grid_periods < 3 {
        v.push("model.grid_periods must be >= 3 so a full central period is available".into());
    }
    if model.points_per_period < 8 {
        v.push("model.points_per_period must be >= 8".into());
    }

    let s = &raw.sweep;
    let sweep = SweepSettings {
        phi0_min: s.phi0_min,
        phi0_max: s.phi0_max,
        phi0_steps: s.phi0_steps,
        time_min: s.time_min_ms * MS,
        time_max: s.time_max_ms * MS,
        time_steps: s.time_steps,
    };
    v.extend(sweep.violations());

    let en = raw.ensemble;
    let ensemble = EnsembleSettings {
        samples: en.samples,
        seed: en.seed,
        kick_errors: en.kick_errors,
        mass_spreads: en.mass_spreads,
        phase_policy: en.phase_policy,
    };
    v.extend(ensemble.violations());
    v.extend(raw.recapture.violations());
    v.extend(raw.reentry.violations());

    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let scenario = Scenario {
        particle: particle.expect("validated"),
        grating,
        phase,
        trap,
        environment,
        presets,
        flight: flight.expect("validated"),
        model,
    };
    Ok(Config {
        experiment: raw.experiment.kind,
        scenario,
        sweep,
        ensemble,
        recapture: raw.recapture,
        reentry: raw.reentry,
        document,
    })
}

// ---------------------------------------------------------------------------------------------
// From scenario to pattern

/// All derived quantities of a scenario for one particle.
#[derive(Debug, Clone)]
pub struct Realization {
    pub particle: ParticleSpec,
    /// Grating with the resolved pulse energy.
    pub grating: GratingSpec,
    pub mie: MieSolution,
    pub phase: PhaseModulation,
    pub mean_scattered_photons: f64,
    pub mean_absorbed_photons: f64,
    pub kernel: GratingKernel,
    pub channels: Vec<DecoherenceChannel>,
    pub inputs: PatternInputs,
    pub source: SourceConditions,
    pub warnings: Vec<String>,
}

impl Realization {
    /// Same particle and grating, different free-flight times.
    pub fn inputs_with_times(&self, t1: f64, t2: f64) -> PatternInputs {
        PatternInputs { t1, t2, ..self.inputs }
    }

    pub fn pattern(&self, mode: Mode, grid: &Grid, options: &FringeOptions) -> Result<FringePattern> {
        self.pattern_with(&self.inputs, mode, grid, options)
    }

    pub fn pattern_with(
        &self,
        inputs: &PatternInputs,
        mode: Mode,
        grid: &Grid,
        options: &FringeOptions,
    ) -> Result<FringePattern> {
        let mut p = fringe_pattern(inputs, &self.kernel, &self.channels, mode, grid, options)?;
        if let Some(m) = p.metadata.as_mut() {
            m.warnings.extend(self.warnings.iter().cloned());
        }
        Ok(p)
    }
}

impl Scenario {
    /// A shipped preset with its defaults.
    pub fn preset(name: &str) -> Result<Scenario> {
        Ok(Config::preset(name, &[])?.scenario)
    }

    pub fn fringe_options(&self) -> FringeOptions {
        FringeOptions {
            order: self.model.order,
            decohere_classical: self.model.decohere_classical,
            ..FringeOptions::default()
        }
    }

    /// Grid of `grid_periods` fringe periods of the base flight, centred on zero.
    pub fn grid(&self) -> Grid {
        let d = self.grating.period();
        let period = crate::talbot::fringe_period(d, self.flight.t1, self.flight.t2);
        Grid::centered(period, self.model.grid_periods, self.model.points_per_period)
    }

    /// Decoherence channels seen by `particle`: the configured ones plus the enabled presets.
    pub fn channels_for(&self, particle: &ParticleSpec) -> Vec<DecoherenceChannel> {
        let mut channels = self.environment.decoherence_channels.clone();
        if self.presets.gas_collisions {
            channels.push(gas_collision_channel(
                self.environment.gas_pressure,
                self.environment.gas_temperature,
                particle.radius,
                self.presets.gas_mass,
            ));
        }
        if self.presets.blackbody_scattering {
            let cm = clausius_mossotti(particle.refractive_index).re;
            channels.push(blackbody_scattering_channel(self.environment.environment_temperature, particle.radius, cm));
        }
        channels
    }

    pub fn realize(&self) -> Result<Realization> {
        self.realize_particle(&self.particle, self.phase)
    }

    /// Derives every particle-dependent quantity for `particle`, keeping the flight times.
    pub fn realize_particle(&self, particle: &ParticleSpec, phase: PhaseSource) -> Result<Realization> {
        let regime = self.model.regime;
        let grating = match phase {
            PhaseSource::PulseEnergy(e) => self.grating.with_pulse_energy(e),
            PhaseSource::Target(phi0) => {
                self.grating.with_pulse_energy(pulse_energy_for_phase(particle, &self.grating, regime, phi0)?)
            }
        };
        let phase = phase_modulation(particle, &grating, regime, self.model.force_rayleigh)?;
        let mie = mie_solve(particle, grating.wavelength)?;
        let (n_sca, n_abs) = if self.model.grating_photons {
            (mean_scattered_photons(&mie, &grating), mean_absorbed_photons(&mie, &grating))
        } else {
            (0.0, 0.0)
        };
        let mut kernel = GratingKernel::coherent(phase.phi0, grating.period());
        kernel.mie_phase = regime == Regime::Mie;
        if n_sca > 0.0 {
            kernel.scattering = Some(GratingDecoherenceKernel::new(&mie, n_sca, DEFAULT_THETA_NODES)?);
        }
        kernel.mean_absorbed_photons = n_abs;

        let inputs = PatternInputs {
            mass: particle.mass,
            t1: self.flight.t1,
            t2: self.flight.t2,
            sigma_x: self.flight.sigma_x(particle, &self.trap),
            sigma_p: self.flight.sigma_p(particle),
            grating_period: grating.period(),
            talbot_time: talbot_time(particle, &grating),
        };
        let source = self.flight.source_conditions(particle, &grating, &self.trap);
        let mut warnings = phase.warnings.clone();
        if !source.satisfied {
            warnings.push(format!(
                "source coherence conditions not met: sigma_x/d = {:.3}, sigma_p d/h = {:.3e}",
                source.size_ratio, source.momentum_ratio
            ));
        }
        Ok(Realization {
            particle: particle.clone(),
            grating,
            mie,
            phase,
            mean_scattered_photons: n_sca,
            mean_absorbed_photons: n_abs,
            kernel,
            channels: self.channels_for(particle),
            inputs,
            source,
            warnings,
        })
    }
}
