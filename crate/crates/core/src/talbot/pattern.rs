//! Probability density of the particle after the second free flight.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::coefficients::{general_coefficient, GratingKernel};
use super::environment::combined_reduction;
use super::{fringe_period, Mode};
use crate::error::{Error, Result};
use crate::model::{DecoherenceChannel, Resolution};
use crate::special::bessel_j;

/// Starting order cutoff of the harmonic sum.
pub const DEFAULT_ORDER: usize = 40;
/// Largest order the engine escalates to (the Bessel kernel's limit).
pub const MAX_ORDER: usize = 1000;

/// Relative floor below which negative densities are treated as round-off.
const NEGATIVE_FLOOR: f64 = 1e-9;
/// Largest tolerated imaginary part of the summed series, relative to the mean density.
const IMAGINARY_TOLERANCE: f64 = 1e-9;
/// Width of the band of top orders whose weight decides escalation.
const TAIL_BAND: usize = 10;

/// Kinematic and source quantities that enter the density formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatternInputs {
    /// kg
    pub mass: f64,
    /// s
    pub t1: f64,
    /// s
    pub t2: f64,
    /// Initial position spread, m.
    pub sigma_x: f64,
    /// Initial momentum spread, kg m s^-1.
    pub sigma_p: f64,
    /// Grating period d, m.
    pub grating_period: f64,
    /// s
    pub talbot_time: f64,
}

impl PatternInputs {
    pub fn fringe_period(&self) -> f64 {
        fringe_period(self.grating_period, self.t1, self.t2)
    }

    /// Mean density m / (sqrt(2 pi) sigma_p (t1 + t2)), m^-1.
    pub fn mean_density(&self) -> f64 {
        self.mass / ((2.0 * PI).sqrt() * self.sigma_p * (self.t1 + self.t2))
    }

    /// Gaussian washout of harmonic n from the initial position spread.
    pub fn envelope(&self, n: i64) -> f64 {
        let r = self.sigma_x * self.t2 / (self.grating_period * (self.t1 + self.t2));
        (-2.0 * PI * PI * (n * n) as f64 * r * r).exp()
    }

    pub fn argument(&self, n: i64) -> f64 {
        harmonic_argument(n, self.t1, self.t2, self.talbot_time)
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, value) in [
            ("mass", self.mass),
            ("t1", self.t1),
            ("t2", self.t2),
            ("sigma_p", self.sigma_p),
            ("grating period", self.grating_period),
            ("Talbot time", self.talbot_time),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                v.push(format!("{name} must be positive and finite (got {value})"));
            }
        }
        if !(self.sigma_x >= 0.0) {
            v.push(format!("sigma_x must be non-negative (got {})", self.sigma_x));
        }
        v
    }
}

/// Talbot argument of harmonic n: n t1 t2 / (t_T (t1 + t2)).
pub fn harmonic_argument(n: i64, t1: f64, t2: f64, talbot_time: f64) -> f64 {
    n as f64 * t1 * t2 / (talbot_time * (t1 + t2))
}

/// Uniform position grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Grid {
    /// `periods` fringe periods centred on x = 0 with `per_period` steps each, both ends included.
    pub fn centered(period: f64, periods: usize, per_period: usize) -> Self {
        let len = periods * per_period + 1;
        let step = period / per_period as f64;
        Grid { start: -0.5 * periods as f64 * period, step, len }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.start + self.step * i as f64).collect()
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.len.saturating_sub(1)) as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FringeOptions {
    pub order: usize,
    pub max_order: usize,
    /// Relative weight of the top orders above which the cutoff is raised.
    pub tail_tolerance: f64,
    /// Apply environmental and grating-photon decoherence to the classical shadow as well.
    pub decohere_classical: bool,
}

impl Default for FringeOptions {
    fn default() -> Self {
        FringeOptions { order: DEFAULT_ORDER, max_order: MAX_ORDER, tail_tolerance: 1e-6, decohere_classical: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelRecord {
    pub name: String,
    pub rate: f64,
    pub resolution: String,
    pub provenance: String,
}

impl From<&DecoherenceChannel> for ChannelRecord {
    fn from(c: &DecoherenceChannel) -> Self {
        let resolution = match &c.resolution {
            Resolution::Complete => "complete".to_string(),
            Resolution::Gaussian { length } => format!("gaussian(length = {length:e} m)"),
            Resolution::Custom(_) => "custom".to_string(),
        };
        ChannelRecord { name: c.name.clone(), rate: c.rate, resolution, provenance: c.provenance.clone() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternMetadata {
    pub mode: Mode,
    pub phi0: f64,
    pub mie_phase: bool,
    pub inputs: PatternInputs,
    pub fringe_period: f64,
    pub order: usize,
    pub channels: Vec<ChannelRecord>,
    pub decohered: bool,
    pub mean_scattered_photons: f64,
    pub mean_absorbed_photons: f64,
    pub imaginary_residue: f64,
    pub clamped_points: usize,
    pub warnings: Vec<String>,
}

/// Sampled density w(x) together with the harmonic series it was summed from.
#[derive(Debug, Clone, Serialize)]
pub struct FringePattern {
    pub x: Vec<f64>,
    /// m^-1
    pub density: Vec<f64>,
    /// Fringe period D, m.
    pub period: f64,
    /// Harmonic amplitudes h_{-N} .. h_N with w(x) = sum h_n exp(2 pi i n x / D); empty when the
    /// pattern was built from samples only.
    pub harmonics: Vec<Complex64>,
    pub metadata: Option<PatternMetadata>,
}

impl FringePattern {
    /// A pattern known only through its samples.
    pub fn from_samples(x: Vec<f64>, density: Vec<f64>, period: f64) -> Self {
        FringePattern { x, density, period, harmonics: Vec::new(), metadata: None }
    }

    pub fn order(&self) -> usize {
        self.harmonics.len() / 2
    }

    pub fn harmonic(&self, n: i64) -> Complex64 {
        let order = self.order() as i64;
        if self.harmonics.is_empty() || n.abs() > order {
            return Complex64::new(0.0, 0.0);
        }
        self.harmonics[(n + order) as usize]
    }

    /// Evaluates the harmonic series at x; `None` for sample-only patterns.
    pub fn eval(&self, x: f64) -> Option<f64> {
        if self.harmonics.is_empty() {
            return None;
        }
        Some(sum_series(&self.harmonics, x, self.period).re)
    }

    /// Mean density over many periods (the zeroth harmonic).
    pub fn mean_density(&self) -> f64 {
        self.harmonic(0).re
    }
}

/// sum h_n exp(2 pi i n x / D), summed by increasing |n|.
fn sum_series(harmonics: &[Complex64], x: f64, period: f64) -> Complex64 {
    let order = harmonics.len() / 2;
    let z = Complex64::from_polar(1.0, 2.0 * PI * x / period);
    let mut zp = Complex64::new(1.0, 0.0);
    let mut sum = harmonics[order];
    for n in 1..=order {
        zp *= z;
        if n % 32 == 0 {
            zp = Complex64::from_polar(1.0, 2.0 * PI * n as f64 * x / period);
        }
        sum += harmonics[order + n] * zp + harmonics[order - n] * zp.conj();
    }
    sum
}

fn coefficient(
    kernel: &GratingKernel,
    inputs: &PatternInputs,
    n: i64,
    mode: Mode,
    decohere: bool,
) -> Result<Complex64> {
    let u = inputs.argument(n);
    if decohere && !kernel.is_coherent() {
        return general_coefficient(kernel, n, u, mode);
    }
    let arg = match mode {
        Mode::Quantum => kernel.phi0 * (PI * u).sin(),
        Mode::Classical => kernel.phi0 * PI * u,
    };
    Ok(Complex64::new(bessel_j(n as i32, arg)?, 0.0))
}

/// Computes w(x) on the grid.
///
/// Harmonic n carries B_n(u_n), the Gaussian envelope and, unless this is an undecohered classical
/// shadow, the environmental reduction of every channel. The order cutoff grows from
/// `options.order` until the top band of orders carries less than `options.tail_tolerance` of the
/// mean density.
pub fn fringe_pattern(
    inputs: &PatternInputs,
    kernel: &GratingKernel,
    channels: &[DecoherenceChannel],
    mode: Mode,
    grid: &Grid,
    options: &FringeOptions,
) -> Result<FringePattern> {
    let v = inputs.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    if grid.len < 2 || !(grid.step > 0.0) {
        return Err(Error::domain("grid needs at least two points and a positive step"));
    }
    let decohere = mode == Mode::Quantum || options.decohere_classical;
    let period = inputs.fringe_period();
    let mean = inputs.mean_density();
    let max_order = options.max_order.min(MAX_ORDER);

    let term = |n: i64| -> Result<Complex64> {
        let mut t = coefficient(kernel, inputs, n, mode, decohere)? * inputs.envelope(n) * mean;
        if decohere && n != 0 {
            t *= combined_reduction(channels, n, inputs.t1, inputs.t2, period, inputs.mass)?;
        }
        Ok(t)
    };

    let mut positive = vec![term(0)?];
    let mut negative = vec![positive[0]];
    let mut order = options.order.clamp(1, max_order);
    loop {
        for n in positive.len()..=order {
            positive.push(term(n as i64)?);
            negative.push(term(-(n as i64))?);
        }
        let band: f64 =
            (order.saturating_sub(TAIL_BAND - 1).max(1)..=order).map(|n| positive[n].norm() + negative[n].norm()).sum();
        if band <= options.tail_tolerance * mean {
            break;
        }
        if order >= max_order {
            return Err(Error::numerical(format!(
                "harmonic series not converged at order {order}: top orders carry {:e} of the mean",
                band / mean
            )));
        }
        order = (order * 2).min(max_order);
    }

    let mut harmonics = Vec::with_capacity(2 * order + 1);
    harmonics.extend(negative[1..=order].iter().rev());
    harmonics.extend(&positive[..=order]);

    let x = grid.points();
    let mut density = Vec::with_capacity(x.len());
    let mut residue: f64 = 0.0;
    let mut clamped = 0;
    let mut warnings = Vec::new();
    for &xi in &x {
        let w = sum_series(&harmonics, xi, period);
        residue = residue.max(w.im.abs() / mean);
        let mut value = w.re;
        if value < 0.0 {
            if value < -NEGATIVE_FLOOR * mean {
                return Err(Error::Invariant(format!("density {value:e} m^-1 at x = {xi:e} m is negative")));
            }
            value = 0.0;
            clamped += 1;
        }
        density.push(value);
    }
    if residue > IMAGINARY_TOLERANCE {
        return Err(Error::numerical(format!(
            "summed density has an imaginary part of {residue:e} relative to its mean"
        )));
    }
    if residue > 0.0 {
        log::debug!("discarding imaginary residue {residue:e} of the {} pattern", mode.as_str());
    }
    if clamped > 0 {
        let msg = format!("clamped {clamped} round-off negative density values to zero");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let grating = kernel.scattering.as_ref().map_or(0.0, |k| k.mean_scattered_photons());
    Ok(FringePattern {
        x,
        density,
        period,
        harmonics,
        metadata: Some(PatternMetadata {
            mode,
            phi0: kernel.phi0,
            mie_phase: kernel.mie_phase,
            inputs: *inputs,
            fringe_period: period,
            order,
            channels: channels.iter().map(ChannelRecord::from).collect(),
            decohered: decohere,
            mean_scattered_photons: grating,
            mean_absorbed_photons: kernel.mean_absorbed_photons,
            imaginary_residue: residue,
            clamped_points: clamped,
            warnings,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::constants::{ATOMIC_MASS_UNIT, BOLTZMANN, PLANCK};
    use proptest::prelude::*;

    const D: f64 = 106.5e-9;

    fn inputs(mass_amu: f64, t: f64) -> PatternInputs {
        let m = mass_amu * ATOMIC_MASS_UNIT;
        let nu: f64 = 50e3;
        let temp = 1e-3;
        PatternInputs {
            mass: m,
            t1: t,
            t2: t,
            sigma_x: (BOLTZMANN * temp / (4.0 * PI * PI * m * nu * nu)).sqrt(),
            sigma_p: (m * BOLTZMANN * temp).sqrt(),
            grating_period: D,
            talbot_time: m * D * D / PLANCK,
        }
    }

    fn pattern(inp: &PatternInputs, phi0: f64, mode: Mode, channels: &[DecoherenceChannel]) -> FringePattern {
        let grid = Grid::centered(inp.fringe_period(), 4, 200);
        fringe_pattern(inp, &GratingKernel::coherent(phi0, D), channels, mode, &grid, &FringeOptions::default())
            .unwrap()
    }

    #[test]
    fn zero_phase_gives_flat_density() {
        let inp = inputs(1e6, 0.029);
        let p = pattern(&inp, 0.0, Mode::Quantum, &[]);
        for &w in &p.density {
            assert!((w - inp.mean_density()).abs() < 1e-12 * inp.mean_density());
        }
    }

    #[test]
    fn equal_flight_times_double_the_period() {
        let inp = inputs(1e6, 0.029);
        assert!((inp.fringe_period() - 2.0 * D).abs() < 1e-20);
    }

    #[test]
    fn autocorrelation_peaks_at_fringe_period() {
        let inp = inputs(1e6, 0.029);
        let p = pattern(&inp, PI / 2.0, Mode::Quantum, &[]);
        let mean: f64 = p.density.iter().sum::<f64>() / p.density.len() as f64;
        let dev: Vec<f64> = p.density.iter().map(|w| w - mean).collect();
        let step = p.x[1] - p.x[0];
        let corr = |lag: usize| -> f64 {
            (0..dev.len() - lag).map(|i| dev[i] * dev[i + lag]).sum::<f64>() / (dev.len() - lag) as f64
        };
        let expected = (p.period / step).round() as usize;
        let best = (expected / 2..=3 * expected / 2).max_by(|&a, &b| corr(a).total_cmp(&corr(b))).unwrap();
        assert!(best.abs_diff(expected) <= 1, "peak at lag {best}, expected {expected}");
    }

    #[test]
    fn mean_over_whole_periods_equals_zeroth_harmonic() {
        let inp = inputs(1e8, 0.071);
        let p = pattern(&inp, 8.0 * PI, Mode::Quantum, &[]);
        // rectangle rule over exactly four periods (drop the duplicated endpoint)
        let n = p.density.len() - 1;
        let mean = p.density[..n].iter().sum::<f64>() / n as f64;
        assert!(((mean - inp.mean_density()) / inp.mean_density()).abs() < 1e-6);
    }

    #[test]
    fn order_escalates_for_strong_gratings() {
        let inp = inputs(1e8, 0.071);
        let p = pattern(&inp, 8.0 * PI, Mode::Classical, &[]);
        assert!(p.metadata.unwrap().order > DEFAULT_ORDER);
    }

    #[test]
    fn decoherence_reduces_quantum_harmonics_only() {
        let inp = inputs(1e6, 0.029);
        let gas = [DecoherenceChannel::new("gas", 5.0, Resolution::Complete)];
        let clean = pattern(&inp, PI / 2.0, Mode::Quantum, &[]);
        let noisy = pattern(&inp, PI / 2.0, Mode::Quantum, &gas);
        for n in 1..10 {
            assert!(noisy.harmonic(n).norm() <= clean.harmonic(n).norm());
        }
        assert_eq!(noisy.harmonic(0), clean.harmonic(0));
        let c1 = pattern(&inp, PI / 2.0, Mode::Classical, &[]);
        let c2 = pattern(&inp, PI / 2.0, Mode::Classical, &gas);
        assert_eq!(c1.harmonics, c2.harmonics);
    }

    #[test]
    fn series_evaluation_matches_samples() {
        let inp = inputs(1e6, 0.029);
        let p = pattern(&inp, PI / 2.0, Mode::Quantum, &[]);
        for i in (0..p.x.len()).step_by(37) {
            assert!((p.eval(p.x[i]).unwrap() - p.density[i]).abs() < 1e-12 * inp.mean_density());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn density_is_non_negative(phi0 in 0.0..(8.0 * PI), t in 0.01..0.1f64, quantum in any::<bool>()) {
            let inp = inputs(1e7, t);
            let mode = if quantum { Mode::Quantum } else { Mode::Classical };
            let p = pattern(&inp, phi0, mode, &[]);
            prop_assert!(p.density.iter().all(|&w| w >= 0.0));
        }
    }
}
