//! The seven experiments a run can perform and the files each one emits.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use throwcatch::config::{Config, Experiment, PhaseSource, Scenario};
use throwcatch::model::FlightPlan;
use throwcatch::recapture::{
    fall_time, potential_barrier, recapture_report, reentry_trials, required_power_from, synthesize_and_fit_reentry,
};
use throwcatch::special::rng::stream;
use throwcatch::stochastic::{
    kick_error_ensemble, mass_spread_ensemble, EnsembleParameter, EnsemblePattern, EnsembleSpec,
};
use throwcatch::talbot::{visibility, FringePattern, Mode, VisibilityMethod};
use throwcatch::{Error, Result};

use crate::output::{sha256_hex, Emitter, RunManifest};
use crate::svg::{Plot, Series};
use crate::table::Table;

const MODES: [Mode; 2] = [Mode::Quantum, Mode::Classical];

/// What to run and where to put it.
#[derive(Debug, Clone, Default)]
pub struct RunRequest {
    /// Falls back to the configuration's `[experiment] kind`.
    pub experiment: Option<Experiment>,
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub out: PathBuf,
    /// Replaces the ensemble and re-entry seeds.
    pub seed: Option<u64>,
    pub overrides: Vec<String>,
}

pub fn load_config(req: &RunRequest) -> Result<Config> {
    let mut overrides = Vec::new();
    if let Some(p) = &req.preset {
        overrides.push(format!("experiment.preset={p:?}"));
    }
    overrides.extend(req.overrides.iter().cloned());
    if let Some(s) = req.seed {
        overrides.push(format!("ensemble.seed={s}"));
        overrides.push(format!("reentry.seed={s}"));
    }
    match &req.config {
        Some(path) => Config::load(path, &overrides),
        None if req.preset.is_some() => Config::parse("", &overrides),
        None => Err(Error::Validation(vec!["no configuration: pass --config or --preset".into()])),
    }
}

/// Loads and validates the configuration, runs the experiment and writes its files followed by
/// the manifest. Nothing is left behind when a step fails.
pub fn run(req: &RunRequest) -> Result<RunManifest> {
    let config = load_config(req)?;
    let experiment = req.experiment.unwrap_or(config.experiment);
    let mut emitter = Emitter::new(&req.out)?;
    let mut warnings = Vec::new();
    let seed = match execute(experiment, &config, &mut emitter, &mut warnings) {
        Ok(seed) => seed,
        Err(e) => {
            emitter.abort();
            return Err(e);
        }
    };
    warnings.sort();
    warnings.dedup();
    for w in &warnings {
        log::warn!("{w}");
    }
    let text = config.to_toml_string();
    emitter.finish(RunManifest {
        tool: "throwcatch".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: experiment.as_str().into(),
        config_sha256: sha256_hex(text.as_bytes()),
        seed,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        files: Vec::new(),
        warnings,
        config: text,
    })
}

fn execute(
    experiment: Experiment,
    config: &Config,
    em: &mut Emitter,
    warnings: &mut Vec<String>,
) -> Result<Option<u64>> {
    match experiment {
        Experiment::Pattern => pattern(config, em, warnings).map(|_| None),
        Experiment::SweepPhi => sweep_phi(config, em, warnings).map(|_| None),
        Experiment::SweepTime => sweep_time(config, em, warnings).map(|_| None),
        Experiment::KickError => kick_error(config, em, warnings).map(|_| Some(config.ensemble.seed)),
        Experiment::MassSpread => mass_spread(config, em, warnings).map(|_| Some(config.ensemble.seed)),
        Experiment::Recapture => recapture(config, em).map(|_| None),
        Experiment::Reentry => reentry(config, em, warnings).map(|_| Some(config.reentry.seed)),
    }
}

fn emit_table(em: &mut Emitter, name: &str, table: Table) -> Result<()> {
    em.write(name, &table.to_csv()?)
}

fn emit_plot(em: &mut Emitter, name: &str, plot: Plot) -> Result<()> {
    em.write(name, plot.render()?.as_bytes())
}

fn emit_json(em: &mut Emitter, name: &str, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    em.write(name, &bytes)
}

/// Visibility under both definitions: (max-min over the central period, harmonic fit).
#[derive(Debug, Clone, Copy, Serialize)]
struct Visibilities {
    max_min: f64,
    harmonic_fit: f64,
}

fn visibilities(p: &FringePattern) -> Result<Visibilities> {
    Ok(Visibilities {
        max_min: visibility(p, VisibilityMethod::MaxMinCentralPeriod)?.visibility,
        harmonic_fit: visibility(p, VisibilityMethod::HarmonicFit)?.visibility,
    })
}

fn pattern_warnings(p: &FringePattern) -> Vec<String> {
    p.metadata.as_ref().map(|m| m.warnings.clone()).unwrap_or_default()
}

fn nm(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v * 1e9).collect()
}

fn normalized(p: &FringePattern) -> Vec<f64> {
    let mean = p.mean_density();
    p.density.iter().map(|w| w / mean).collect()
}

fn percent(s: f64) -> String {
    format!("{}%", (s * 1000.0).round() / 10.0)
}

fn pattern(config: &Config, em: &mut Emitter, warnings: &mut Vec<String>) -> Result<()> {
    let s = &config.scenario;
    let r = s.realize()?;
    warnings.extend(r.warnings.iter().cloned());
    let (grid, options) = (s.grid(), s.fringe_options());
    let mut plot = Plot::new("Fringe pattern", "x [nm]", "w / mean");
    let mut summary = serde_json::Map::new();
    for mode in MODES {
        let p = r.pattern(mode, &grid, &options)?;
        warnings.extend(pattern_warnings(&p));
        let v = visibilities(&p)?;
        emit_table(
            em,
            &format!("pattern_{}.csv", mode.as_str()),
            Table::new().column("x [m]", p.x.clone()).column("w [m^-1]", p.density.clone()),
        )?;
        plot = plot.with(Series::new(mode.as_str(), &nm(&p.x), &normalized(&p)));
        summary.insert(mode.as_str().into(), json!({ "visibility": v, "metadata": p.metadata }));
    }
    summary.insert(
        "realization".into(),
        json!({
            "phi0": r.phase.phi0,
            "size_parameter": r.phase.size_parameter,
            "pulse_energy_j": r.grating.pulse_energy,
            "mean_scattered_photons": r.mean_scattered_photons,
            "mean_absorbed_photons": r.mean_absorbed_photons,
            "talbot_time_s": r.inputs.talbot_time,
            "t1_s": r.inputs.t1,
            "t2_s": r.inputs.t2,
            "fringe_period_m": r.inputs.fringe_period(),
        }),
    );
    emit_json(em, "pattern.json", &summary)?;
    emit_plot(em, "pattern.svg", plot)
}

/// Quantum and classical visibilities of one sweep point, with its warnings.
type SweepPoint = (Visibilities, Visibilities, Vec<String>);

/// Visibilities of both modes for one realized scenario.
fn point(s: &Scenario) -> Result<SweepPoint> {
    let r = s.realize()?;
    let (grid, options) = (s.grid(), s.fringe_options());
    let q = r.pattern(Mode::Quantum, &grid, &options)?;
    let c = r.pattern(Mode::Classical, &grid, &options)?;
    let mut w = r.warnings.clone();
    w.extend(pattern_warnings(&q));
    w.extend(pattern_warnings(&c));
    Ok((visibilities(&q)?, visibilities(&c)?, w))
}

fn sweep_table(
    em: &mut Emitter,
    name: &str,
    x_header: &str,
    x: &[f64],
    points: &[SweepPoint],
    warnings: &mut Vec<String>,
) -> Result<Table> {
    for p in points {
        warnings.extend(p.2.iter().cloned());
    }
    let col = |f: &dyn Fn(&SweepPoint) -> f64| points.iter().map(f).collect::<Vec<_>>();
    let table = Table::new()
        .column(x_header, x.to_vec())
        .column("quantum max-min [1]", col(&|p| p.0.max_min))
        .column("classical max-min [1]", col(&|p| p.1.max_min))
        .column("quantum harmonic fit [1]", col(&|p| p.0.harmonic_fit))
        .column("classical harmonic fit [1]", col(&|p| p.1.harmonic_fit));
    emit_table(em, name, table.clone())?;
    Ok(table)
}

fn sweep_phi(config: &Config, em: &mut Emitter, warnings: &mut Vec<String>) -> Result<()> {
    let values = config.sweep.phi0_values();
    let points: Vec<_> = values
        .par_iter()
        .map(|&phi0| {
            let mut s = config.scenario.clone();
            s.phase = PhaseSource::Target(phi0);
            point(&s)
        })
        .collect::<Result<_>>()?;
    sweep_table(em, "sweep_phi.csv", "phi0 [rad]", &values, &points, warnings)?;
    let plot = Plot::new("Visibility against phase modulation", "phi0 [rad]", "visibility")
        .with(Series::new("quantum", &values, &points.iter().map(|p| p.0.max_min).collect::<Vec<_>>()))
        .with(Series::new("classical", &values, &points.iter().map(|p| p.1.max_min).collect::<Vec<_>>()));
    emit_plot(em, "sweep_phi.svg", plot)
}

fn sweep_time(config: &Config, em: &mut Emitter, warnings: &mut Vec<String>) -> Result<()> {
    let values = config.sweep.time_values();
    let base = &config.scenario;
    let points: Vec<_> = values
        .par_iter()
        .map(|&t| {
            let mut s = base.clone();
            s.flight = FlightPlan {
                kick_error_relative_sigma: base.flight.kick_error_relative_sigma,
                ..FlightPlan::from_total_time(t, base.flight.initial_temperature)?
            };
            point(&s)
        })
        .collect::<Result<_>>()?;
    let ms: Vec<f64> = values.iter().map(|t| t * 1e3).collect();
    sweep_table(em, "sweep_time.csv", "total time [s]", &values, &points, warnings)?;
    let plot = Plot::new("Visibility against flight time", "total flight time [ms]", "visibility")
        .with(Series::new("quantum", &ms, &points.iter().map(|p| p.0.max_min).collect::<Vec<_>>()))
        .with(Series::new("classical", &ms, &points.iter().map(|p| p.1.max_min).collect::<Vec<_>>()));
    emit_plot(em, "sweep_time.svg", plot)
}

#[derive(Debug, Serialize)]
struct EnsembleRow {
    relative_sigma: f64,
    mode: Mode,
    visibility: Visibilities,
    sample_visibility_mean: f64,
    sample_visibility_sd: f64,
    samples: usize,
    rejected: usize,
    warnings: Vec<String>,
}

fn ensemble_row(sigma: f64, e: &EnsemblePattern) -> Result<EnsembleRow> {
    Ok(EnsembleRow {
        relative_sigma: sigma,
        mode: e.mode,
        visibility: visibilities(&e.pattern)?,
        sample_visibility_mean: e.sample_visibility.mean,
        sample_visibility_sd: e.sample_visibility.sd,
        samples: e.samples.len(),
        rejected: e.rejected,
        warnings: e.warnings.clone(),
    })
}

/// Table, summary, averaged patterns and plots of a family of ensembles.
fn emit_ensembles(
    em: &mut Emitter,
    stem: &str,
    title: &str,
    sigmas: &[f64],
    results: &[Vec<EnsemblePattern>],
    modes: &[Mode],
    warnings: &mut Vec<String>,
) -> Result<()> {
    let mut rows = Vec::new();
    for (s, family) in sigmas.iter().zip(results) {
        for e in family {
            warnings.extend(e.warnings.iter().cloned());
            rows.push(ensemble_row(*s, e)?);
        }
    }
    let mut table = Table::new().column(format!("{stem} [1]"), sigmas.to_vec());
    for (k, mode) in modes.iter().enumerate() {
        let pick =
            |f: fn(&EnsembleRow) -> f64| -> Vec<f64> { rows.iter().skip(k).step_by(modes.len()).map(f).collect() };
        table = table
            .column(format!("{} max-min [1]", mode.as_str()), pick(|r| r.visibility.max_min))
            .column(format!("{} harmonic fit [1]", mode.as_str()), pick(|r| r.visibility.harmonic_fit))
            .column(format!("{} sample sd [1]", mode.as_str()), pick(|r| r.sample_visibility_sd));
    }
    emit_table(em, &format!("{stem}.csv"), table)?;
    emit_json(em, &format!("{stem}.json"), &rows)?;

    let x = &results[0][0].pattern.x;
    let mut patterns = Table::new().column("x [m]", x.clone());
    for (k, mode) in modes.iter().enumerate() {
        let mut plot = Plot::new(format!("{title}, {} patterns", mode.as_str()), "x [nm]", "w / mean");
        for (s, family) in sigmas.iter().zip(results) {
            let p = &family[k].pattern;
            patterns = patterns.column(format!("{} {} [m^-1]", mode.as_str(), percent(*s)), p.density.clone());
            plot = plot.with(Series::new(percent(*s), &nm(&p.x), &normalized(p)));
        }
        emit_plot(em, &format!("{stem}_{}.svg", mode.as_str()), plot)?;
    }
    emit_table(em, &format!("{stem}_patterns.csv"), patterns)?;

    let pct: Vec<f64> = sigmas.iter().map(|s| 100.0 * s).collect();
    let mut plot = Plot::new(format!("{title}, visibility"), "relative spread [%]", "visibility");
    for (k, mode) in modes.iter().enumerate() {
        let v: Vec<f64> = rows.iter().skip(k).step_by(modes.len()).map(|r| r.visibility.max_min).collect();
        plot = plot.with(Series::new(mode.as_str(), &pct, &v));
    }
    emit_plot(em, &format!("{stem}.svg"), plot)
}

fn kick_error(config: &Config, em: &mut Emitter, warnings: &mut Vec<String>) -> Result<()> {
    let e = &config.ensemble;
    let results: Vec<Vec<EnsemblePattern>> = e
        .kick_errors
        .iter()
        .map(|&sigma| {
            let spec = EnsembleSpec::new(EnsembleParameter::LaunchVelocity, sigma, e.samples, e.seed);
            kick_error_ensemble(&config.scenario, &spec, &MODES)
        })
        .collect::<Result<_>>()?;
    emit_ensembles(em, "kick_error", "Kick error", &e.kick_errors, &results, &MODES, warnings)
}

fn mass_spread(config: &Config, em: &mut Emitter, warnings: &mut Vec<String>) -> Result<()> {
    let e = &config.ensemble;
    let results: Vec<Vec<EnsemblePattern>> = e
        .mass_spreads
        .iter()
        .map(|&sigma| {
            let spec = EnsembleSpec {
                phase_policy: e.phase_policy,
                ..EnsembleSpec::new(EnsembleParameter::Mass, sigma, e.samples, e.seed)
            };
            mass_spread_ensemble(&config.scenario, &spec, &MODES)
        })
        .collect::<Result<_>>()?;
    emit_ensembles(em, "mass_spread", "Mass spread", &e.mass_spreads, &results, &MODES, warnings)
}

fn recapture(config: &Config, em: &mut Emitter) -> Result<()> {
    let s = &config.scenario;
    let settings = &config.recapture;
    let report = recapture_report(settings, &s.trap, &s.particle)?;
    emit_json(em, "recapture.json", &report)?;

    // kinetic energy against the barrier at the displacement reached over the whole flight
    let tc = &report.transverse;
    let total = 2.0 * fall_time(settings.throw_height_m);
    let top = if tc.feasible { 2.0 * tc.v_x_max } else { 1e-5 };
    let v: Vec<f64> = (0..=200).map(|i| top * i as f64 / 200.0).collect();
    let m = report.particle.mass;
    let kinetic: Vec<f64> = v.iter().map(|v| 0.5 * m * v * v).collect();
    let barrier: Vec<f64> = v.iter().map(|v| potential_barrier(v * total, &s.trap, &report.particle)).collect();
    emit_table(
        em,
        "transverse.csv",
        Table::new()
            .column("v_x [m s^-1]", v.clone())
            .column("x [m]", v.iter().map(|v| v * total).collect())
            .column("kinetic energy [J]", kinetic.clone())
            .column("barrier [J]", barrier.clone()),
    )?;
    let um_s: Vec<f64> = v.iter().map(|v| v * 1e6).collect();
    let zj = |e: &[f64]| e.iter().map(|e| e * 1e30).collect::<Vec<_>>();
    emit_plot(
        em,
        "transverse.svg",
        Plot::new("Transverse recapture condition", "v_x [um/s]", "energy [1e-30 J]")
            .with(Series::new("kinetic", &um_s, &zj(&kinetic)))
            .with(Series::new("barrier", &um_s, &zj(&barrier))),
    )?;

    let a = &report.axial;
    let net: Vec<f64> = a.f_grad.iter().zip(&a.f_scat).map(|(g, s)| g + s).collect();
    emit_table(
        em,
        "axial_forces.csv",
        Table::new()
            .column("z [m]", a.z.clone())
            .column("F_grad [N]", a.f_grad.clone())
            .column("F_scat [N]", a.f_scat.clone())
            .column("F_net [N]", net.clone()),
    )?;
    let um: Vec<f64> = a.z.iter().map(|z| z * 1e6).collect();
    let pn = |f: &[f64]| f.iter().map(|f| f * 1e12).collect::<Vec<_>>();
    emit_plot(
        em,
        "axial_forces.svg",
        Plot::new("Axial forces", "z [um]", "force along the beam [pN]")
            .with(Series::new("gradient", &um, &pn(&a.f_grad)))
            .with(Series::new("scattering", &um, &pn(&a.f_scat)))
            .with(Series::new("net", &um, &pn(&net))),
    )?;

    let v_max = report.baseline_v_max.unwrap_or(report.profile_v_max);
    let speeds: Vec<f64> = (1..=40).map(|i| 0.05 * i as f64).collect();
    let power: Vec<f64> = speeds.iter().map(|&v| required_power_from(v, s.trap.power, v_max)).collect::<Result<_>>()?;
    emit_table(
        em,
        "stopping_power.csv",
        Table::new().column("return speed [m s^-1]", speeds.clone()).column("power [W]", power.clone()),
    )?;
    emit_plot(
        em,
        "stopping_power.svg",
        Plot::new("Power needed to stop a returning particle", "return speed [m/s]", "power [W]").with(Series::new(
            "required power",
            &speeds,
            &power,
        )),
    )
}

fn reentry(config: &Config, em: &mut Emitter, warnings: &mut Vec<String>) -> Result<()> {
    let settings = &config.reentry;
    let params = settings.params(&config.scenario.trap);
    let (trace, fit) = synthesize_and_fit_reentry(&params, &mut stream(settings.seed, 0))?;
    let wd = fit.angular_frequency;
    let g = params.damping_rate;
    let b = (fit.velocity + 0.5 * g * fit.estimate) / wd;
    let fitted: Vec<f64> = trace
        .time
        .iter()
        .map(|t| {
            let tau = t - params.trap_on_time;
            (-0.5 * g * tau).exp() * (fit.estimate * (wd * tau).cos() + b * (wd * tau).sin())
        })
        .collect();
    emit_table(
        em,
        "reentry_trace.csv",
        Table::new()
            .column("t [s]", trace.time.clone())
            .column("z true [m]", trace.clean.clone())
            .column("z measured [m]", trace.measured.clone())
            .column("z fit [m]", fitted.clone()),
    )?;
    let stats =
        if settings.trials >= 2 { Some(reentry_trials(&params, settings.trials, settings.seed)?) } else { None };
    if let Some(st) = &stats {
        if st.failures > 0 {
            warnings.push(format!("{} of {} re-entry fits did not converge", st.failures, st.trials));
        }
    }
    emit_json(em, "reentry.json", &json!({ "params": params, "fit": fit, "statistics": stats }))?;

    // the first half millisecond after the trap comes on, with the extrapolated start marked
    let n = trace.time.iter().take_while(|&&t| t < params.trap_on_time + 0.5e-3).count().max(2);
    let us: Vec<f64> = trace.time[..n].iter().map(|t| t * 1e6).collect();
    let to_nm = |z: &[f64]| z.iter().map(|z| z * 1e9).collect::<Vec<_>>();
    let t_on = params.trap_on_time * 1e6;
    emit_plot(
        em,
        "reentry.svg",
        Plot::new("Re-entry position", "time since release [us]", "z [nm]")
            .with(Series::new("true motion", &us, &to_nm(&trace.clean[..n])))
            .with(Series::new("fit", &us, &to_nm(&fitted[..n])))
            .with(Series::new("estimate at trap-on", &[t_on, t_on], &[0.0, fit.estimate * 1e9])),
    )
}
