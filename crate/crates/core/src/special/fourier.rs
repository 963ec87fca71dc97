//! Fourier coefficients of periodic kernels on a uniform grid.

use std::f64::consts::PI;

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Samples per period used when the caller does not ask for a specific count.
pub const DEFAULT_SAMPLES: usize = 1 << 14;

/// Spectrum c_n, n in [-N, N], of a periodic function.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSpectrum {
    pub order: usize,
    pub period: f64,
    /// c_{-N} .. c_N
    pub coefficients: Vec<Complex64>,
}

impl FourierSpectrum {
    pub fn get(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.order {
            return Complex64::new(0.0, 0.0);
        }
        self.coefficients[(n + self.order as i64) as usize]
    }

    pub fn orders(&self) -> impl Iterator<Item = i64> {
        let n = self.order as i64;
        -n..=n
    }

    /// sum |c_n|^2
    pub fn power(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest |c_{-n} - conj(c_n)|.
    pub fn hermitian_defect(&self) -> f64 {
        (1..=self.order as i64).map(|n| (self.get(-n) - self.get(n).conj()).norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.orders().map(|n| self.get(n) * Complex64::from_polar(1.0, 2.0 * PI * n as f64 * x / self.period)).sum()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FourierOptions {
    /// Exact sample count; `None` applies [`sample_count`] with [`DEFAULT_SAMPLES`] as floor.
    pub samples: Option<usize>,
}

/// Nyquist-plus-margin rule: at least four samples per period of the highest
/// requested order plus a guard band of `bandwidth` orders on either side, rounded
/// up to a power of two and never below `floor`.
pub fn sample_count(order: usize, bandwidth: usize, floor: usize) -> usize {
    (4 * (order + bandwidth + 16)).next_power_of_two().max(floor)
}

/// c_n = (1/L) int_0^L kernel(x) exp(-2 pi i n x / L) dx for |n| <= order.
///
/// Uses the rectangle rule on a uniform grid, which is spectrally accurate for
/// smooth periodic kernels; aliasing from orders beyond M/2 is the only error.
pub fn fourier_coefficients<F>(kernel: F, period: f64, order: usize, options: FourierOptions) -> Result<FourierSpectrum>
where
    F: Fn(f64) -> Complex64,
{
    if order < 1 {
        return Err(Error::domain("Fourier order must be at least 1"));
    }
    if !(period > 0.0) {
        return Err(Error::domain(format!("period must be positive, got {period}")));
    }
    let m = options.samples.unwrap_or_else(|| sample_count(order, 0, DEFAULT_SAMPLES));
    if m < 2 * order + 1 {
        return Err(Error::domain(format!("{m} samples cannot resolve orders up to {order}")));
    }
    let mut buffer = Vec::with_capacity(m);
    for j in 0..m {
        let x = period * j as f64 / m as f64;
        let v = kernel(x);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::numerical(format!("kernel is not finite at x = {x:e}")));
        }
        buffer.push(v);
    }
    Ok(spectrum_from_samples(buffer, period, order))
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Coefficients from one period of uniformly spaced samples starting at x = 0.
pub fn spectrum_from_samples(mut buffer: Vec<Complex64>, period: f64, order: usize) -> FourierSpectrum {
    let m = buffer.len();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m));
    fft.process(&mut buffer);
    let scale = 1.0 / m as f64;
    let coefficients =
        (-(order as i64)..=order as i64).map(|n| buffer[n.rem_euclid(m as i64) as usize] * scale).collect();
    FourierSpectrum { order, period, coefficients }
}
