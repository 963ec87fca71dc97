//! Monte-Carlo ensembles: fringe patterns averaged over kick-velocity errors and over a spread of
//! particle masses.
//!
//! Sample `i` draws from its own random stream, the per-sample work runs in parallel, and the
//! results are combined by a fixed pairwise tree over the sample index, so a seed determines the
//! output bit for bit regardless of the thread count.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PhaseSource, Realization, Scenario};
use crate::error::{Error, Result};
use crate::model::constants::GRAVITY;
use crate::special::rng::stream;
use crate::talbot::{visibility, FringePattern, Mode, VisibilityResult};

/// Samples further than this many standard deviations from the mean are discarded.
pub const TRUNCATION_SIGMAS: f64 = 4.0;
pub const DEFAULT_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleParameter {
    LaunchVelocity,
    Mass,
}

/// How the grating acts on a particle whose mass differs from the nominal one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhasePolicy {
    /// Same pulse energy for every particle; phi0 follows the particle's response.
    #[default]
    Resample,
    /// phi0 held at its nominal value.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub parameter: EnsembleParameter,
    pub relative_sigma: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub phase_policy: PhasePolicy,
}

impl EnsembleSpec {
    pub fn new(parameter: EnsembleParameter, relative_sigma: f64, n_samples: usize, seed: u64) -> Self {
        EnsembleSpec { parameter, relative_sigma, n_samples, seed, phase_policy: PhasePolicy::Resample }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.relative_sigma >= 0.0 && self.relative_sigma.is_finite()) {
            v.push(format!("relative_sigma must be finite and >= 0 (got {})", self.relative_sigma));
        }
        if self.n_samples < 1 {
            v.push("n_samples must be >= 1".into());
        }
        v
    }

    /// Draw of sample `index` relative to the nominal value; `None` when truncated away.
    fn factor(&self, index: u64) -> Option<f64> {
        let z: f64 = StandardNormal.sample(&mut stream(self.seed, index));
        let f = 1.0 + self.relative_sigma * z;
        (z.abs() <= TRUNCATION_SIGMAS && f > 0.0).then_some(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleRecord {
    pub index: u64,
    /// Launch velocity, m s^-1, or mass, kg.
    pub value: f64,
    pub visibility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityStats {
    pub mean: f64,
    /// Sample standard deviation; zero for a single sample.
    pub sd: f64,
}

/// Average of the sampled patterns for one mode.
#[derive(Debug, Clone, Serialize)]
pub struct EnsemblePattern {
    pub mode: Mode,
    pub spec: EnsembleSpec,
    /// Mean density and mean harmonics on the base grid.
    pub pattern: FringePattern,
    /// Standard error of the mean density per grid point, m^-1.
    pub standard_error: Vec<f64>,
    /// Visibility of the averaged pattern.
    pub visibility: VisibilityResult,
    /// Statistics of the per-sample visibilities.
    pub sample_visibility: VisibilityStats,
    pub samples: Vec<SampleRecord>,
    pub rejected: usize,
    pub warnings: Vec<String>,
}

/// Running mean and sum of squared deviations of a block of samples.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    density: Vec<f64>,
    m2: Vec<f64>,
    harmonics: Vec<Complex64>,
}

impl Moments {
    fn leaf(pattern: &FringePattern, order: usize) -> Self {
        let own = pattern.order();
        let mut harmonics = vec![Complex64::new(0.0, 0.0); 2 * order + 1];
        harmonics[order - own..=order + own].copy_from_slice(&pattern.harmonics);
        Moments { n: 1.0, density: pattern.density.clone(), m2: vec![0.0; pattern.density.len()], harmonics }
    }

    /// Pairwise combination; exact when both blocks have the same mean.
    fn merge(a: Moments, b: Moments) -> Moments {
        let n = a.n + b.n;
        let wb = b.n / n;
        let cross = a.n * b.n / n;
        let mut density = a.density;
        let mut m2 = a.m2;
        for i in 0..density.len() {
            let delta = b.density[i] - density[i];
            density[i] += delta * wb;
            m2[i] += b.m2[i] + delta * delta * cross;
        }
        let mut harmonics = a.harmonics;
        for (h, hb) in harmonics.iter_mut().zip(&b.harmonics) {
            *h += (hb - *h) * wb;
        }
        Moments { n, density, m2, harmonics }
    }
}

fn tree(leaves: &mut [Option<Moments>]) -> Moments {
    if leaves.len() == 1 {
        return leaves[0].take().expect("each leaf is consumed once");
    }
    let (left, right) = leaves.split_at_mut(leaves.len() / 2);
    Moments::merge(tree(left), tree(right))
}

struct Sample {
    index: u64,
    value: f64,
    patterns: Vec<FringePattern>,
}

/// Averages per-sample patterns into one ensemble per mode.
fn assemble(
    base: &Scenario,
    spec: &EnsembleSpec,
    modes: &[Mode],
    samples: Vec<Sample>,
    rejected: usize,
    warnings: Vec<String>,
) -> Result<Vec<EnsemblePattern>> {
    if samples.is_empty() {
        return Err(Error::domain(format!(
            "all {} samples were truncated away at relative sigma {}",
            spec.n_samples, spec.relative_sigma
        )));
    }
    let method = base.model.visibility;
    let mut out = Vec::with_capacity(modes.len());
    for (k, &mode) in modes.iter().enumerate() {
        let first = &samples[0].patterns[k];
        let same_period = samples.iter().all(|s| (s.patterns[k].period - first.period).abs() <= 1e-12 * first.period);
        let order = samples.iter().map(|s| s.patterns[k].order()).max().unwrap_or(0);
        let mut leaves: Vec<Option<Moments>> =
            samples.iter().map(|s| Some(Moments::leaf(&s.patterns[k], order))).collect();
        let m = tree(&mut leaves);
        let n = m.n;
        let standard_error = if n > 1.0 {
            m.m2.iter().map(|v| (v / (n - 1.0) / n).sqrt()).collect()
        } else {
            vec![0.0; m.density.len()]
        };
        let mut pattern = FringePattern::from_samples(first.x.clone(), m.density, first.period);
        if same_period {
            pattern.harmonics = m.harmonics;
        }
        let mut records = Vec::with_capacity(samples.len());
        for s in &samples {
            records.push(SampleRecord {
                index: s.index,
                value: s.value,
                visibility: visibility(&s.patterns[k], method)?.visibility,
            });
        }
        let mean = records.iter().map(|r| r.visibility).sum::<f64>() / n;
        let sd = if n > 1.0 {
            (records.iter().map(|r| (r.visibility - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let visibility = visibility(&pattern, method)?;
        let mut warnings = warnings.clone();
        if !same_period {
            warnings.push("sample fringe periods differ; the mean pattern carries no harmonic series".into());
        }
        out.push(EnsemblePattern {
            mode,
            spec: spec.clone(),
            pattern,
            standard_error,
            visibility,
            sample_visibility: VisibilityStats { mean, sd },
            samples: records,
            rejected,
            warnings,
        });
    }
    Ok(out)
}

fn check(spec: &EnsembleSpec, expected: EnsembleParameter, modes: &[Mode]) -> Result<()> {
    let v = spec.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    if spec.parameter != expected {
        return Err(Error::domain(format!(
            "ensemble over {:?} passed where {:?} is required",
            spec.parameter, expected
        )));
    }
    if modes.is_empty() {
        return Err(Error::domain("at least one mode is required"));
    }
    Ok(())
}

fn collect(results: Vec<Result<Option<Sample>>>) -> Result<(Vec<Sample>, usize)> {
    let mut samples = Vec::with_capacity(results.len());
    let mut rejected = 0;
    for r in results {
        match r? {
            Some(s) => samples.push(s),
            None => rejected += 1,
        }
    }
    Ok((samples, rejected))
}

/// Patterns averaged over launch velocities v ~ Normal(v0, sigma v0), the grating pulse at each
/// throw's apex.
pub fn kick_error_ensemble(base: &Scenario, spec: &EnsembleSpec, modes: &[Mode]) -> Result<Vec<EnsemblePattern>> {
    check(spec, EnsembleParameter::LaunchVelocity, modes)?;
    let f = &base.flight;
    if (f.t1 - f.t2).abs() > 1e-12 * f.t1 {
        return Err(Error::domain(format!(
            "kick-error ensembles need a symmetric ballistic throw (t1 = {}, t2 = {})",
            f.t1, f.t2
        )));
    }
    let v0 = GRAVITY * f.t1;
    let realization = base.realize()?;
    let grid = base.grid();
    let options = base.fringe_options();
    let results: Vec<Result<Option<Sample>>> = (0..spec.n_samples as u64)
        .into_par_iter()
        .map(|index| {
            let Some(factor) = spec.factor(index) else {
                return Ok(None);
            };
            let v = v0 * factor;
            let t = v / GRAVITY;
            let inputs = realization.inputs_with_times(t, t);
            let patterns =
                modes.iter().map(|&m| realization.pattern_with(&inputs, m, &grid, &options)).collect::<Result<_>>()?;
            Ok(Some(Sample { index, value: v, patterns }))
        })
        .collect();
    let (samples, rejected) = collect(results)?;
    assemble(base, spec, modes, samples, rejected, realization.warnings.clone())
}

/// Patterns averaged over masses m ~ Normal(m0, sigma m0); radius, Mie response, phase, Talbot
/// time and the thermal spreads follow each mass while the flight stays at the base plan.
pub fn mass_spread_ensemble(base: &Scenario, spec: &EnsembleSpec, modes: &[Mode]) -> Result<Vec<EnsemblePattern>> {
    check(spec, EnsembleParameter::Mass, modes)?;
    let nominal = base.realize()?;
    let phase = match spec.phase_policy {
        PhasePolicy::Resample => PhaseSource::PulseEnergy(nominal.grating.pulse_energy),
        PhasePolicy::Fixed => PhaseSource::Target(nominal.phase.phi0),
    };
    log::info!(
        "mass spread {}: every mass-dependent quantity resampled, phase policy {:?}",
        spec.relative_sigma,
        spec.phase_policy
    );
    let grid = base.grid();
    let options = base.fringe_options();
    let m0 = base.particle.mass;
    let results: Vec<Result<Option<Sample>>> = (0..spec.n_samples as u64)
        .into_par_iter()
        .map(|index| {
            let Some(factor) = spec.factor(index) else {
                return Ok(None);
            };
            let mass = m0 * factor;
            let particle = base.particle.with_mass(mass)?;
            let r: Realization = base.realize_particle(&particle, phase)?;
            let patterns = modes.iter().map(|&m| r.pattern(m, &grid, &options)).collect::<Result<_>>()?;
            Ok(Some(Sample { index, value: mass, patterns }))
        })
        .collect();
    let (samples, rejected) = collect(results)?;
    let mut warnings = nominal.warnings.clone();
    warnings.push(format!("mass samples resample all physics; phase policy {:?}", spec.phase_policy));
    assemble(base, spec, modes, samples, rejected, warnings)
}
