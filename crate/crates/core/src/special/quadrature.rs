//! Adaptive and fixed-rule quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default absolute tolerance of [`integrate`] callers that have no better idea.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Maximum number of interval bisections before giving up.
pub const MAX_SUBDIVISIONS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Estimated absolute error, <= the requested tolerance on success.
    pub error: f64,
    pub evaluations: usize,
}

// Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half, centre last).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_64, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    check(fc, centre)?;
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let (x1, x2) = (centre - dx, centre + dx);
        let (f1, f2) = (f(x1), f(x2));
        check(f1, x1)?;
        check(f2, x2)?;
        k += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    Ok(Segment { a, b, value: k * half, error: ((k - g) * half).abs() })
}

fn check(v: f64, x: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::numerical(format!("integrand not finite at x = {x:e}")))
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of f over [a, b].
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate drops below `tol` or [`MAX_SUBDIVISIONS`] is reached.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Integral> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, a, b)?;
    let mut value = first.value;
    let mut error = first.error;
    heap.push(first);
    let mut evaluations = 15;
    let mut splits = 0;
    while error > tol {
        if splits >= MAX_SUBDIVISIONS {
            return Err(Error::numerical(format!(
                "quadrature on [{a:e}, {b:e}] did not converge after {MAX_SUBDIVISIONS} subdivisions \
                 (error estimate {error:e}, tolerance {tol:e})"
            )));
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        let left = kronrod(&f, worst.a, mid)?;
        let right = kronrod(&f, mid, worst.b)?;
        evaluations += 30;
        splits += 1;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Re-sum occasionally to stop drift in the running totals.
        if splits % 64 == 0 {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(Integral { value, error: error.max(0.0), evaluations })
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_over_half_period() {
        let r = integrate(f64::sin, 0.0, PI, 1e-12).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!(r.error <= 1e-12);
    }

    #[test]
    fn square_on_unit_interval() {
        let r = integrate(|x| x * x, 0.0, 1.0, 1e-12).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn peaked_integrand_needs_subdivision() {
        // int_{-1}^{1} 1/(1e-4 + x^2) = 2 atan(100)/1e-2
        let exact = 2.0 * 100f64.atan() / 1e-2;
        let r = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-8).unwrap();
        assert!((r.value - exact).abs() < 1e-8, "{} vs {exact}", r.value);
        assert!(r.evaluations > 15);
    }

    #[test]
    fn reports_non_finite_integrand() {
        let e = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-9).unwrap_err();
        assert!(matches!(e, Error::Numerical(_)));
    }

    #[test]
    fn reports_non_convergence() {
        // sin(1/x) oscillates infinitely often near zero.
        let e = integrate(|x| (1.0 / (x + 1e-300)).sin() / (x + 1e-3).sqrt(), 1e-12, 1.0, 1e-15);
        assert!(e.is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(10);
        for p in 0..20 {
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((got - exact).abs() < 1e-13, "degree {p}: {got}");
        }
        let (_, w) = gauss_legendre(256);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }
}
