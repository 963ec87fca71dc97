//! Spherical Bessel functions and the logarithmic derivative used by Mie theory.

use num_complex::Complex64;

/// j_0 .. j_{n_max} at real x > 0 by normalized downward recurrence.
pub fn spherical_j(n_max: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "spherical_j needs x > 0");
    let start = n_max + 20 + (x as usize) + (10.0 * x.max(1.0).sqrt()) as usize;
    let mut out = vec![0.0; n_max + 1];
    let (mut above, mut current) = (0.0, 1e-300);
    let mut seq0 = 0.0;
    let mut seq1 = 0.0;
    for n in (1..=start).rev() {
        let below = (2 * n + 1) as f64 / x * current - above;
        above = current;
        current = below;
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            for o in out.iter_mut() {
                *o *= 1e-250;
            }
        }
        let k = n - 1;
        if k <= n_max {
            out[k] = current;
        }
        if k == 1 {
            seq1 = current;
        }
        if k == 0 {
            seq0 = current;
        }
    }
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let scale = if x < 1.0 || j0.abs() >= j1.abs() { j0 / seq0 } else { j1 / seq1 };
    for o in out.iter_mut() {
        *o *= scale;
    }
    out
}

/// y_0 .. y_{n_max} at real x > 0 by upward recurrence (stable for y).
pub fn spherical_y(n_max: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "spherical_y needs x > 0");
    let mut out = vec![0.0; n_max + 1];
    out[0] = -x.cos() / x;
    if n_max >= 1 {
        out[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for n in 1..n_max {
        out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
    }
    out
}

/// Logarithmic derivative D_n(z) = psi_n'(z)/psi_n(z) for n = 0..=n_max, by
/// downward recurrence D_{n-1} = n/z - 1/(D_n + n/z).
pub fn log_derivative(n_max: usize, z: Complex64) -> Vec<Complex64> {
    let start = n_max.max(z.norm().ceil() as usize) + 16;
    let mut d = Complex64::new(0.0, 0.0);
    let mut out = vec![Complex64::new(0.0, 0.0); n_max + 1];
    for n in (1..=start).rev() {
        let nz = n as f64 / z;
        if n <= n_max {
            out[n] = d;
        }
        d = nz - 1.0 / (d + nz);
    }
    out[0] = d;
    out
}
