//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to stderr (uncaptured) and
//! then asserts, so `cargo test --test acceptance` shows the whole scorecard even when one fails.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use throwcatch::config::Config;
use throwcatch::mie::{force_sign_change, mie_solve, phase_modulation, scattering_reduction, Regime};
use throwcatch::model::constants::{ATOMIC_MASS_UNIT, BOLTZMANN, PLANCK};
use throwcatch::model::{talbot_time, DecoherenceChannel, GratingSpec, ParticleSpec, Resolution};
use throwcatch::recapture::{recapture_report, reentry_trials, RecaptureSettings};
use throwcatch::stochastic::{
    kick_error_ensemble, mass_spread_ensemble, EnsembleParameter, EnsemblePattern, EnsembleSpec,
};
use throwcatch::talbot::{
    environmental_reduction, fringe_pattern, talbot_coefficients_closed_form, talbot_coefficients_general, visibility,
    FringeOptions, GratingKernel, Grid, Mode, PatternInputs, VisibilityMethod,
};

const SEED: u64 = 1;

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion:>2} [{verdict}] {name}: {detail}");
}

fn both(e: &EnsemblePattern) -> (f64, f64) {
    let v = |m| visibility(&e.pattern, m).unwrap().visibility;
    (v(VisibilityMethod::MaxMinCentralPeriod), v(VisibilityMethod::HarmonicFit))
}

/// One row of a visibility table: relative spread, classical and quantum percentages.
type Row = (f64, f64, f64);

struct TableCheck {
    /// Per method: quantum and classical visibilities of every row.
    measured: Vec<(VisibilityMethod, Vec<(f64, f64)>)>,
    detail: String,
}

fn ensemble_table(preset: &str, parameter: EnsembleParameter, rows: &[Row], modes: &[Mode]) -> TableCheck {
    let config = Config::preset(preset, &[]).unwrap();
    let mut per_method =
        vec![(VisibilityMethod::MaxMinCentralPeriod, Vec::new()), (VisibilityMethod::HarmonicFit, Vec::new())];
    let mut detail = String::new();
    for &(sigma, _, _) in rows {
        let spec = EnsembleSpec::new(parameter, sigma / 100.0, config.ensemble.samples, SEED);
        let family = match parameter {
            EnsembleParameter::LaunchVelocity => kick_error_ensemble(&config.scenario, &spec, modes),
            EnsembleParameter::Mass => mass_spread_ensemble(&config.scenario, &spec, modes),
        }
        .unwrap();
        let q = both(&family[0]);
        let c = family.get(1).map(both).unwrap_or((f64::NAN, f64::NAN));
        per_method[0].1.push((q.0, c.0));
        per_method[1].1.push((q.1, c.1));
        detail.push_str(&format!(
            "\n    {sigma:>4}%: quantum {:.1} (fit {:.1}), classical {:.1} (fit {:.1})",
            100.0 * q.0,
            100.0 * q.1,
            100.0 * c.0,
            100.0 * c.1
        ));
    }
    TableCheck { measured: per_method, detail }
}

fn within(measured: f64, expected_percent: f64) -> bool {
    (100.0 * measured - expected_percent).abs() <= 5.0
}

const KICK_1E6: [Row; 4] = [(0.0, 77.3, 98.2), (10.0, 75.0, 94.9), (20.0, 73.5, 88.3), (30.0, 74.5, 81.1)];
const KICK_1E8: [Row; 6] = [
    (0.0, 92.2, 79.6),
    (5.0, 93.0, 79.6),
    (10.0, 92.5, 79.1),
    (15.0, 91.5, 78.4),
    (20.0, 90.3, 77.2),
    (25.0, 89.0, 75.5),
];
const MASS_1E6: [Row; 6] = [
    (0.0, 77.3, 98.2),
    (10.0, 75.6, 95.1),
    (20.0, 72.4, 88.3),
    (30.0, 66.0, 81.1),
    (40.0, 67.1, 74.5),
    (50.0, 68.7, 71.4),
];

#[test]
fn criterion_01_kick_error_visibilities_light_particle() {
    let start = Instant::now();
    let t =
        ensemble_table("silica-1e6", EnsembleParameter::LaunchVelocity, &KICK_1E6, &[Mode::Quantum, Mode::Classical]);
    let elapsed = start.elapsed();
    let matching: Vec<&str> = t
        .measured
        .iter()
        .filter(|(_, v)| v.iter().zip(&KICK_1E6).all(|(&(q, c), &(_, ce, qe))| within(q, qe) && within(c, ce)))
        .map(|(m, _)| m.as_str())
        .collect();
    let decreasing = t.measured.iter().any(|(_, v)| v.windows(2).all(|w| w[1].0 < w[0].0));
    let fast = elapsed < Duration::from_secs(600);
    let pass = !matching.is_empty() && decreasing && fast;
    report(
        1,
        "kick-error table, 1e6 amu, 2000 samples",
        pass,
        &format!(
            "within 5 points under {matching:?}, quantum decreasing {decreasing}, {:.1} s{}",
            elapsed.as_secs_f64(),
            t.detail
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_kick_error_visibilities_heavy_particle() {
    let t =
        ensemble_table("silica-1e8", EnsembleParameter::LaunchVelocity, &KICK_1E8, &[Mode::Quantum, Mode::Classical]);
    let matching: Vec<&str> = t
        .measured
        .iter()
        .filter(|(_, v)| v.iter().zip(&KICK_1E8).all(|(&(q, c), &(_, ce, qe))| within(q, qe) && within(c, ce)))
        .map(|(m, _)| m.as_str())
        .collect();
    let classical_ahead = t.measured.iter().any(|(_, v)| v.iter().all(|&(q, c)| c > q));
    let pass = !matching.is_empty() && classical_ahead;
    report(
        2,
        "kick-error table, 1e8 amu",
        pass,
        &format!("within 5 points under {matching:?}, classical above quantum {classical_ahead}{}", t.detail),
    );
    assert!(pass);
}

#[test]
fn criterion_03_mass_spread_visibilities() {
    let t = ensemble_table("silica-1e6", EnsembleParameter::Mass, &MASS_1E6, &[Mode::Quantum, Mode::Classical]);
    let matching: Vec<&str> = t
        .measured
        .iter()
        .filter(|(_, v)| v.iter().zip(&MASS_1E6).all(|(&(q, _), &(_, _, qe))| within(q, qe)))
        .map(|(m, _)| m.as_str())
        .collect();
    // non-increasing through 30 %
    let monotone = t.measured.iter().any(|(_, v)| v[..4].windows(2).all(|w| w[1].0 <= w[0].0));
    let pass = !matching.is_empty() && monotone;
    report(
        3,
        "mass-spread table, quantum column",
        pass,
        &format!("within 5 points under {matching:?}, non-increasing to 30% {monotone}{}", t.detail),
    );
    assert!(pass);
}

fn recapture() -> throwcatch::recapture::RecaptureReport {
    let config = Config::preset("silica-1e6", &[]).unwrap();
    recapture_report(&RecaptureSettings::default(), &config.scenario.trap, &config.scenario.particle).unwrap()
}

#[test]
fn criterion_04_maximum_stoppable_velocity() {
    let r = recapture();
    let v = r.baseline_v_max.unwrap();
    let pass = (v - 0.38).abs() <= 0.005;
    report(
        4,
        "maximum stoppable velocity",
        pass,
        &format!("{v:.4} m/s from the quoted force and distance (own profile {:.4} m/s)", r.profile_v_max),
    );
    assert!(pass);
}

#[test]
fn criterion_05_transverse_recapture_thresholds() {
    let t = recapture().transverse;
    let close = |x: f64, target: f64| (x / target - 1.0).abs() <= 0.15;
    let pass = (t.total_time - 0.2856).abs() <= 1e-4
        && close(t.x_max, 2.4e-6)
        && close(t.v_x_max, 8.5e-6)
        && close(t.t_max, 5e-6);
    report(
        5,
        "transverse recapture thresholds",
        pass,
        &format!(
            "flight {:.2} ms, x_max {:.2} um, v_x {:.2} um/s, T {:.2} uK",
            t.total_time * 1e3,
            t.x_max * 1e6,
            t.v_x_max * 1e6,
            t.t_max * 1e6
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_power_to_stop_a_returning_particle() {
    let p = recapture().required_power;
    let pass = (p / 1.5 - 1.0).abs() <= 0.15;
    report(6, "power to stop a 1.4 m/s particle", pass, &format!("{p:.3} W"));
    assert!(pass);
}

#[test]
fn criterion_07_talbot_times() {
    let g = Config::preset("silica-1e6", &[]).unwrap().scenario.grating;
    let heavy = talbot_time(&ParticleSpec::silica_amu(1e8).unwrap(), &g);
    let light = talbot_time(&ParticleSpec::silica_amu(1e6).unwrap(), &g);
    let pass = (heavy / 2.84 - 1.0).abs() <= 0.005 && (light / 28.4e-3 - 1.0).abs() <= 0.005;
    report(7, "Talbot times", pass, &format!("1e8 amu {heavy:.4} s, 1e6 amu {:.3} ms", light * 1e3));
    assert!(pass);
}

#[test]
fn criterion_08_finite_size_phase_and_force_sign() {
    let scenario = Config::preset("silica-1e6", &[]).unwrap().scenario;
    let (g, n) = (scenario.realize().unwrap().grating, scenario.particle.refractive_index);
    let r = 0.01 * g.wavelength / (2.0 * PI);
    let tiny = ParticleSpec::from_radius(r, scenario.particle.density, n).unwrap();
    let mie = phase_modulation(&tiny, &g, Regime::Mie, false).unwrap().phi0;
    let dipole = phase_modulation(&tiny, &g, Regime::Rayleigh, false).unwrap().phi0;
    let ratio = mie / dipole;
    let sign = force_sign_change(n, g.wavelength, 0.1, 3.0, 0.01).unwrap();
    let ratio_ok = (0.99..=1.01).contains(&ratio);
    let sign_ok = sign.is_some_and(|x| (0.8..=1.4).contains(&x));
    let pass = ratio_ok && sign_ok;
    report(
        8,
        "finite-size phase and force sign change",
        pass,
        &format!("phi0 ratio at kR = 0.01 {ratio:.6}, first F0 sign change at kR = {sign:?} (window 0.8..1.4)"),
    );
    assert!(pass);
}

fn inputs(mass_amu: f64, t: f64, d: f64) -> PatternInputs {
    let m = mass_amu * ATOMIC_MASS_UNIT;
    let nu: f64 = 50e3;
    let temp = 1e-3;
    PatternInputs {
        mass: m,
        t1: t,
        t2: t,
        sigma_x: (BOLTZMANN * temp / (4.0 * PI * PI * m * nu * nu)).sqrt(),
        sigma_p: (m * BOLTZMANN * temp).sqrt(),
        grating_period: d,
        talbot_time: m * d * d / PLANCK,
    }
}

fn property(name: &str, cases: u32, test: impl Fn(&mut TestRunner) -> Result<(), String>) -> Option<String> {
    let mut runner = TestRunner::new(ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() });
    test(&mut runner).err().map(|e| format!("{name}: {e}"))
}

fn mode_of(quantum: bool) -> Mode {
    if quantum {
        Mode::Quantum
    } else {
        Mode::Classical
    }
}

#[test]
fn criterion_09_invariant_properties() {
    let start = Instant::now();
    let d = 106.5e-9;
    let mut failures = Vec::new();

    failures.extend(property("closed form equals Fourier analysis", 64, |r| {
        r.run(&(0.0..8.0 * PI, -1.0..1.0f64, any::<bool>()), |(phi0, u, quantum)| {
            let mode = mode_of(quantum);
            let order = 120;
            let a = talbot_coefficients_closed_form(phi0, u, order, mode).unwrap();
            let b = talbot_coefficients_general(&GratingKernel::coherent(phi0, d), u, order, mode).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).norm() < 1e-8, "{x} vs {y}");
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    }));

    failures.extend(property("reduction factors lie in (0, 1]", 256, |r| {
        r.run(
            &(0.0..50.0f64, 1e-9..1e-6f64, -200i64..200, 1e-3..0.2f64, any::<bool>()),
            |(rate, length, n, t, gaussian)| {
                let resolution = if gaussian { Resolution::Gaussian { length } } else { Resolution::Complete };
                let c = DecoherenceChannel::new("test", rate, resolution);
                let m = 1e7 * ATOMIC_MASS_UNIT;
                let rn = environmental_reduction(&c, n, t, t, 2.0 * d, m).unwrap();
                prop_assert!(rn > 0.0 && rn <= 1.0, "R_{n} = {rn}");
                prop_assert_eq!(environmental_reduction(&c, 0, t, t, 2.0 * d, m).unwrap(), 1.0);
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
    }));

    failures.extend(property("scattering reduction at zero separation", 32, |r| {
        let g = GratingSpec::new(213e-9, 1e-6, 1e-9, 1e-8).unwrap();
        r.run(&(10e-9..80e-9f64, 0.0..100.0f64, -1e-6..1e-6f64), |(radius, photons, z)| {
            let p = ParticleSpec::from_radius(radius, 1850.0, Complex64::new(1.45, 0.0)).unwrap();
            let mie = mie_solve(&p, g.wavelength).unwrap();
            let rs = scattering_reduction(&mie, &g, photons, 0.0, z).unwrap();
            prop_assert!((rs - 1.0).norm() < 1e-12, "{rs}");
            Ok(())
        })
        .map_err(|e| e.to_string())
    }));

    failures.extend(property("densities are non-negative and repeat with the fringe period", 96, |r| {
        r.run(&(0.3..8.0 * PI, 0.01..0.1f64, any::<bool>()), |(phi0, t, quantum)| {
            let inp = inputs(1e7, t, d);
            let grid = Grid::centered(inp.fringe_period(), 4, 200);
            let p = fringe_pattern(
                &inp,
                &GratingKernel::coherent(phi0, d),
                &[],
                mode_of(quantum),
                &grid,
                &FringeOptions::default(),
            )
            .unwrap();
            prop_assert!(p.density.iter().all(|&w| w >= 0.0));
            // circular autocorrelation over the four whole periods (the last sample repeats the first)
            let whole = &p.density[..p.density.len() - 1];
            let mean = whole.iter().sum::<f64>() / whole.len() as f64;
            let dev: Vec<f64> = whole.iter().map(|w| w - mean).collect();
            let corr = |lag: usize| -> f64 { (0..dev.len()).map(|i| dev[i] * dev[(i + lag) % dev.len()]).sum() };
            if corr(0) > 1e-12 * mean * mean * dev.len() as f64 {
                let expected = ((p.period / (p.x[1] - p.x[0])).round()) as usize;
                let best = (expected / 2..=3 * expected / 2).max_by(|&a, &b| corr(a).total_cmp(&corr(b))).unwrap();
                prop_assert!(best.abs_diff(expected) <= 1, "peak at lag {best}, expected {expected}");
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    }));

    failures.extend(property("seeded ensembles are byte-identical across thread counts", 8, |r| {
        let scenario = Config::preset("silica-1e6", &[]).unwrap().scenario;
        r.run(&(any::<u64>(), 0.0..0.3f64), |(seed, sigma)| {
            let spec = EnsembleSpec::new(EnsembleParameter::LaunchVelocity, sigma, 16, seed);
            let on = |threads: usize| {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
                pool.install(|| kick_error_ensemble(&scenario, &spec, &[Mode::Quantum]).unwrap())
            };
            let (a, b) = (on(1), on(4));
            let bits = |e: &EnsemblePattern| e.pattern.density.iter().map(|w| w.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a[0]), bits(&b[0]));
            Ok(())
        })
        .map_err(|e| e.to_string())
    }));

    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(300);
    report(
        9,
        "invariant properties",
        pass,
        &format!(
            "{} failing, {:.1} s{}",
            failures.len(),
            elapsed.as_secs_f64(),
            failures.iter().map(|f| format!("\n    {f}")).collect::<String>()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_reentry_position_estimates() {
    let config = Config::preset("silica-1e6", &[]).unwrap();
    let settings = &config.reentry;
    let params = settings.params(&config.scenario.trap);
    let s = reentry_trials(&params, 500, settings.seed).unwrap();
    let pass = s.failures == 0 && s.spread < 15e-9 && s.bias.abs() < 1e-9;
    report(
        10,
        "re-entry position over 500 trials",
        pass,
        &format!(
            "sd {:.2} nm, bias {:+.3} nm, range {:.1} nm, {} failed fits",
            s.spread * 1e9,
            s.bias * 1e9,
            s.range * 1e9,
            s.failures
        ),
    );
    assert!(pass);
}
