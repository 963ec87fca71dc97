//! Re-entry position from the motion recorded after the trap is switched back on.
//!
//! The recorded axial position is band-pass filtered around the trap frequency, a damped
//! sinusoid of known damping is fitted by least squares, and the fit is extrapolated back to the moment the
//! trap came on.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::rng::stream;

/// Filter settling times, in units of the inverse bandwidth, left out of the fit at either end.
const GUARD_TIMES: f64 = 6.0;
const MAX_ITERATIONS: usize = 400;

/// Oscillator and detection parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReentryParams {
    /// Position at the moment the trap comes on, m.
    pub true_entry: f64,
    /// m s^-1
    pub entry_velocity: f64,
    /// Undamped trap frequency, Hz.
    pub frequency: f64,
    /// Energy damping rate, s^-1.
    pub damping_rate: f64,
    /// One-sided position noise density, m Hz^-1/2.
    pub noise_density: f64,
    /// Hz
    pub sample_rate: f64,
    /// Length of the recorded trace, s.
    pub window: f64,
    /// Trap-on time measured from release, s.
    pub trap_on_time: f64,
    pub band_fraction: f64,
    pub filter_order: u32,
}

impl ReentryParams {
    fn samples(&self) -> usize {
        (self.window * self.sample_rate).round() as usize
    }

    fn damped_frequency(&self) -> Result<f64> {
        let w0 = 2.0 * PI * self.frequency;
        let d = w0 * w0 - 0.25 * self.damping_rate * self.damping_rate;
        if d <= 0.0 {
            return Err(Error::domain("trapped motion must be under-damped"));
        }
        Ok(d.sqrt())
    }

    fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.frequency > 0.0) {
            v.push(format!("trap frequency must be positive (got {})", self.frequency));
        }
        if !(self.sample_rate > 3.0 * self.frequency * (1.0 + self.band_fraction)) {
            v.push("sample rate must exceed three times the upper band edge".to_string());
        }
        if !(self.band_fraction > 0.0 && self.band_fraction < 1.0) {
            v.push("band fraction must lie in (0, 1)".to_string());
        }
        if !(self.noise_density >= 0.0 && self.damping_rate >= 0.0) {
            v.push("noise density and damping rate must be >= 0".to_string());
        }
        if self.filter_order < 1 {
            v.push("filter order must be >= 1".to_string());
        }
        let guard = GUARD_TIMES / self.bandwidth();
        if !(self.window > 8.0 * guard) {
            v.push(format!("window of {} s is too short for the filter guard of {guard} s", self.window));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    fn bandwidth(&self) -> f64 {
        2.0 * self.band_fraction * self.frequency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReentryTrace {
    /// Time since release, s.
    pub time: Vec<f64>,
    /// Noise-free position, m.
    pub clean: Vec<f64>,
    /// m
    pub measured: Vec<f64>,
}

/// Damped oscillation from the entry state plus white detection noise with per-sample
/// standard deviation sqrt(S fs / 2).
pub fn synthesize_trace(params: &ReentryParams, rng: &mut impl Rng) -> Result<ReentryTrace> {
    params.validate()?;
    let wd = params.damped_frequency()?;
    let g = params.damping_rate;
    let (x0, v0) = (params.true_entry, params.entry_velocity);
    let b = (v0 + 0.5 * g * x0) / wd;
    let sigma = params.noise_density * (0.5 * params.sample_rate).sqrt();
    let n = params.samples();
    let mut time = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    let mut measured = Vec::with_capacity(n);
    for i in 0..n {
        let tau = i as f64 / params.sample_rate;
        let x = (-0.5 * g * tau).exp() * (x0 * (wd * tau).cos() + b * (wd * tau).sin());
        let z: f64 = rng.sample(StandardNormal);
        time.push(params.trap_on_time + tau);
        clean.push(x);
        measured.push(x + sigma * z);
    }
    Ok(ReentryTrace { time, clean, measured })
}

/// Zero-phase Butterworth band-pass: the power response 1 / (1 + ((f^2 - f0^2) / (f B))^(2N))
/// applied in the frequency domain to the even extension of the trace.
fn band_pass(data: &[f64], params: &ReentryParams) -> Vec<f64> {
    let n = data.len();
    let m = 2 * n;
    let mut buf: Vec<Complex64> = data.iter().chain(data.iter().rev()).map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    let lo = params.frequency * (1.0 - params.band_fraction);
    let hi = params.frequency * (1.0 + params.band_fraction);
    let f0 = (lo * hi).sqrt();
    let bw = hi - lo;
    let order = 2 * params.filter_order as i32;
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = if k <= m / 2 { k } else { m - k };
        let f = kk as f64 * params.sample_rate / m as f64;
        let gain = if f == 0.0 { 0.0 } else { 1.0 / (1.0 + ((f * f - f0 * f0) / (f * bw)).powi(order)) };
        *c *= gain / m as f64;
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf[..n].iter().map(|c| c.re).collect()
}

/// Least-squares amplitudes (a, b) of env(t) (a cos wt + b sin wt) and the residual sum.
fn linear_fit(t0: f64, dt: f64, env: &[f64], y: &[f64], w: f64) -> (f64, f64, f64) {
    let (mut scc, mut sss, mut scs, mut syc, mut sys, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let step = Complex64::from_polar(1.0, w * dt);
    let mut rot = Complex64::from_polar(1.0, w * t0);
    for (i, (&e, &y)) in env.iter().zip(y).enumerate() {
        if i % 1024 == 0 {
            rot = Complex64::from_polar(1.0, w * (t0 + i as f64 * dt));
        }
        let (c, s) = (e * rot.re, e * rot.im);
        scc += c * c;
        sss += s * s;
        scs += c * s;
        syc += y * c;
        sys += y * s;
        syy += y * y;
        rot *= step;
    }
    let det = scc * sss - scs * scs;
    if det.abs() <= f64::MIN_POSITIVE {
        return (0.0, 0.0, syy);
    }
    let a = (syc * sss - sys * scs) / det;
    let b = (sys * scc - syc * scs) / det;
    (a, b, (syy - a * syc - b * sys).max(0.0))
}

/// Golden-section minimum of `f` on [lo, hi]; flags a minimum pinned to either end.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, usize, bool) {
    let (a0, b0) = (lo, hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut it = 0;
    while hi - lo > tol && it < MAX_ITERATIONS {
        if fc < fd {
            hi = d;
            (d, fd) = (c, fc);
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            (c, fc) = (d, fd);
            d = lo + r * (hi - lo);
            fd = f(d);
        }
        it += 1;
    }
    let x = 0.5 * (lo + hi);
    let interior = x - a0 > 2.0 * tol && b0 - x > 2.0 * tol;
    (x, it, hi - lo <= tol && interior)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReentryFit {
    /// Fitted position at the trap-on time, m.
    pub estimate: f64,
    /// Fitted velocity at the trap-on time, m s^-1.
    pub velocity: f64,
    /// Damped angular frequency, rad s^-1.
    pub angular_frequency: f64,
    /// RMS of the filtered data minus the fit over the fitted samples, m.
    pub rms_residual: f64,
    /// RMS of the filtered data over the same samples, m.
    pub rms_signal: f64,
    pub fitted_samples: usize,
    pub iterations: usize,
}

/// Fits the recorded trace and extrapolates it back to the first sample.
pub fn estimate_reentry(trace: &ReentryTrace, params: &ReentryParams) -> Result<ReentryFit> {
    params.validate()?;
    let n = trace.measured.len();
    let filtered = band_pass(&trace.measured, params);
    let guard = (GUARD_TIMES / params.bandwidth() * params.sample_rate).ceil() as usize;
    if n < 4 * guard {
        return Err(Error::domain(format!("{n} samples leave nothing to fit after the filter guard")));
    }
    let range = guard..n - guard;
    let y = &filtered[range];

    // the damping rate is a trap calibration; amplitude, phase and frequency are fitted
    let g = params.damping_rate;
    let dt = 1.0 / params.sample_rate;
    let t0 = guard as f64 * dt;
    let env: Vec<f64> = (0..y.len()).map(|i| (-0.5 * g * (t0 + i as f64 * dt)).exp()).collect();
    let rss = |w: f64| linear_fit(t0, dt, &env, y, w).2;

    // scan a quarter of the Fourier resolution across the band, then refine the best cell
    let w_nominal = params.damped_frequency()?;
    let dw = 2.0 * PI / (y.len() as f64 * dt);
    let cells = (params.band_fraction * w_nominal / (0.25 * dw)).ceil().min(400.0) as i64;
    let w_start = (-cells..=cells)
        .map(|k| w_nominal + 0.25 * dw * k as f64)
        .map(|w| (w, rss(w)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(w_nominal, |(w, _)| w);
    let (w, iterations, converged) = golden_section(rss, w_start - 0.25 * dw, w_start + 0.25 * dw, 1e-7 * dw);
    let (a, b, rss) = linear_fit(t0, dt, &env, y, w);
    // the basis runs on time since the first sample, so a is already the entry position
    let rms_residual = (rss / y.len() as f64).sqrt();
    let rms_signal = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
    if !converged || !a.is_finite() {
        return Err(Error::numerical(format!(
            "re-entry fit did not converge after {iterations} iterations (rms residual {rms_residual:.3e} m, rms signal {rms_signal:.3e} m, w = {w:.6e} rad/s)"
        )));
    }
    Ok(ReentryFit {
        estimate: a,
        velocity: b * w - 0.5 * g * a,
        angular_frequency: w,
        rms_residual,
        rms_signal,
        fitted_samples: y.len(),
        iterations,
    })
}

/// One synthetic trial: trace from `rng`, then the fit.
pub fn synthesize_and_fit_reentry(params: &ReentryParams, rng: &mut impl Rng) -> Result<(ReentryTrace, ReentryFit)> {
    let trace = synthesize_trace(params, rng)?;
    let fit = estimate_reentry(&trace, params)?;
    Ok((trace, fit))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReentryStatistics {
    pub true_entry: f64,
    pub trials: usize,
    pub seed: u64,
    /// Successful estimates in trial order, m.
    pub estimates: Vec<f64>,
    pub failures: usize,
    pub mean: f64,
    /// Sample standard deviation of the estimates, m.
    pub spread: f64,
    /// mean - true entry, m.
    pub bias: f64,
    /// Largest minus smallest estimate, m.
    pub range: f64,
}

/// Independent trials on seeded streams; trial i always sees the same noise.
pub fn reentry_trials(params: &ReentryParams, trials: usize, seed: u64) -> Result<ReentryStatistics> {
    params.validate()?;
    if trials < 2 {
        return Err(Error::domain("re-entry statistics need at least two trials"));
    }
    let results: Vec<Result<ReentryFit>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            synthesize_and_fit_reentry(params, &mut rng).map(|(_, f)| f)
        })
        .collect();
    let mut estimates = Vec::with_capacity(trials);
    let mut failures = 0;
    for r in results {
        match r {
            Ok(f) => estimates.push(f.estimate),
            Err(Error::Numerical(msg)) => {
                log::warn!("{msg}");
                failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if estimates.len() < 2 {
        return Err(Error::numerical(format!("{failures} of {trials} re-entry fits failed")));
    }
    let k = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / k;
    let spread = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    let (lo, hi) = estimates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &e| (l.min(e), h.max(e)));
    Ok(ReentryStatistics {
        true_entry: params.true_entry,
        trials,
        seed,
        estimates,
        failures,
        mean,
        spread,
        bias: mean - params.true_entry,
        range: hi - lo,
    })
}
