//! Fringe contrast of a sampled pattern.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::pattern::FringePattern;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityMethod {
    /// (w_max - w_min) / (w_max + w_min) over the period centred on x = 0.
    MaxMinCentralPeriod,
    /// A / c0 of the least-squares fit c0 + A cos(2 pi x / D + phase) over the same window.
    HarmonicFit,
}

impl VisibilityMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            VisibilityMethod::MaxMinCentralPeriod => "max_min_central_period",
            VisibilityMethod::HarmonicFit => "harmonic_fit",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VisibilityResult {
    pub visibility: f64,
    pub method: VisibilityMethod,
    /// Window the visibility was taken over, m.
    pub window: (f64, f64),
    /// Set for a flat pattern, whose visibility is reported as zero.
    pub degenerate: bool,
}

/// Golden-section search for the extremum of f near x0 within +-h.
fn refine(f: &dyn Fn(f64) -> f64, x0: f64, h: f64, maximize: bool) -> f64 {
    let g = |x: f64| if maximize { -f(x) } else { f(x) };
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (x0 - h, x0 + h);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    let best = g(0.5 * (a + b)).min(g(x0));
    if maximize {
        -best
    } else {
        best
    }
}

pub fn visibility(pattern: &FringePattern, method: VisibilityMethod) -> Result<VisibilityResult> {
    let (x, w, period) = (&pattern.x, &pattern.density, pattern.period);
    if x.len() < 3 || x.len() != w.len() || !(period > 0.0) {
        return Err(Error::domain("pattern needs matching samples and a positive period"));
    }
    let span = x[x.len() - 1] - x[0];
    let step = x[1] - x[0];
    if span < 3.0 * period - 0.5 * step {
        return Err(Error::domain(format!("pattern spans {:.3} periods; at least 3 are needed", span / period)));
    }
    let window = (-0.5 * period, 0.5 * period);
    let inside: Vec<usize> =
        (0..x.len()).filter(|&i| x[i] >= window.0 - 1e-12 * period && x[i] < window.1 - 1e-12 * period).collect();
    if inside.len() < 3 {
        return Err(Error::domain("central period holds fewer than three samples"));
    }

    let flat = |v: f64, w: (f64, f64)| VisibilityResult { visibility: v, method, window: w, degenerate: v == 0.0 };
    match method {
        VisibilityMethod::MaxMinCentralPeriod => {
            let imax = *inside.iter().max_by(|&&a, &&b| w[a].total_cmp(&w[b])).unwrap();
            let imin = *inside.iter().min_by(|&&a, &&b| w[a].total_cmp(&w[b])).unwrap();
            let (mut hi, mut lo) = (w[imax], w[imin]);
            if !pattern.harmonics.is_empty() {
                let f = |t: f64| pattern.eval(t).unwrap_or(0.0);
                hi = hi.max(refine(&f, x[imax], step, true));
                lo = lo.min(refine(&f, x[imin], step, false)).max(0.0);
            }
            if !(hi + lo > 0.0) || hi - lo <= 1e-14 * hi.abs() {
                return Ok(flat(0.0, window));
            }
            Ok(flat(((hi - lo) / (hi + lo)).clamp(0.0, 1.0), window))
        }
        VisibilityMethod::HarmonicFit => {
            // normal equations for c0 + a cos + b sin
            let mut m = [[0.0; 3]; 3];
            let mut r = [0.0; 3];
            for &i in &inside {
                let th = 2.0 * PI * x[i] / period;
                let basis = [1.0, th.cos(), th.sin()];
                for p in 0..3 {
                    r[p] += basis[p] * w[i];
                    for q in 0..3 {
                        m[p][q] += basis[p] * basis[q];
                    }
                }
            }
            let c = solve3(m, r).ok_or_else(|| Error::numerical("singular harmonic fit"))?;
            if !(c[0] > 0.0) {
                return Ok(flat(0.0, window));
            }
            let v = (c[1].hypot(c[2]) / c[0]).clamp(0.0, 1.0);
            if v <= 1e-14 {
                return Ok(flat(0.0, window));
            }
            Ok(flat(v, window))
        }
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (r[row] - s) / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled(f: impl Fn(f64) -> f64, period: f64, per: usize) -> FringePattern {
        let x: Vec<f64> = (0..=4 * per).map(|i| -2.0 * period + period * i as f64 / per as f64).collect();
        let w = x.iter().map(|&t| f(t)).collect();
        FringePattern::from_samples(x, w, period)
    }

    #[test]
    fn flat_pattern_has_no_visibility() {
        let p = sampled(|_| 3.0, 1.0, 50);
        for m in [VisibilityMethod::MaxMinCentralPeriod, VisibilityMethod::HarmonicFit] {
            let v = visibility(&p, m).unwrap();
            assert_eq!(v.visibility, 0.0);
            assert!(v.degenerate);
        }
    }

    #[test]
    fn full_cosine_has_unit_visibility() {
        let p = sampled(|x| 1.0 + (2.0 * PI * x / 2.0).cos(), 2.0, 64);
        for m in [VisibilityMethod::MaxMinCentralPeriod, VisibilityMethod::HarmonicFit] {
            assert!((visibility(&p, m).unwrap().visibility - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn methods_differ_for_anharmonic_fringes() {
        let p = sampled(|x| 1.0 + 0.5 * (2.0 * PI * x).cos() + 0.3 * (4.0 * PI * x).cos(), 1.0, 200);
        let a = visibility(&p, VisibilityMethod::MaxMinCentralPeriod).unwrap().visibility;
        let b = visibility(&p, VisibilityMethod::HarmonicFit).unwrap().visibility;
        assert!((b - 0.5).abs() < 1e-12);
        assert!(a > b);
    }

    #[test]
    fn short_pattern_is_rejected() {
        let x: Vec<f64> = (0..100).map(|i| i as f64 * 0.02).collect();
        let w = vec![1.0; 100];
        assert!(visibility(&FringePattern::from_samples(x, w, 1.0), VisibilityMethod::HarmonicFit).is_err());
    }
}
