//! Bessel functions of integer order: J_n and the modified I_n.

use crate::error::{Error, Result};

pub const MAX_ORDER: i32 = 1000;
pub const MAX_ARGUMENT: f64 = 1e4;

const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;

/// J_n(x) for integer n.
///
/// Evaluated with Miller's downward recurrence normalized by
/// J_0 + 2 sum_k J_2k = 1, started well above max(n, |x|) so the recurrence
/// tracks the minimal solution for every argument in range.
pub fn bessel_j(n: i32, x: f64) -> Result<f64> {
    if n.abs() > MAX_ORDER {
        return Err(Error::domain(format!("Bessel order {n} exceeds |n| <= {MAX_ORDER}")));
    }
    if !x.is_finite() || x.abs() > MAX_ARGUMENT {
        return Err(Error::domain(format!("Bessel argument {x} exceeds |x| <= {MAX_ARGUMENT}")));
    }
    let order = n.unsigned_abs() as usize;
    // J_{-n} = (-1)^n J_n and J_n(-x) = (-1)^n J_n(x)
    let odd = order % 2 == 1;
    let sign = if odd && ((n < 0) != (x < 0.0)) { -1.0 } else { 1.0 };
    Ok(sign * bessel_j_nonneg(order, x.abs()))
}

/// J_n(x) for every order 0..=n_max at once, x >= 0.
pub fn bessel_j_sequence(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = start_order(n_max, x);
    let two_over_x = 2.0 / x;
    let mut above = 0.0;
    let mut current = 1.0;
    let mut norm = 0.0;
    let mut tmp = vec![0.0; n_max + 1];
    let mut k = start;
    while k > 0 {
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        k -= 1;
        if current.abs() > RESCALE_ABOVE {
            current *= RESCALE_BY;
            above *= RESCALE_BY;
            norm *= RESCALE_BY;
            for t in tmp.iter_mut() {
                *t *= RESCALE_BY;
            }
        }
        if k <= n_max {
            tmp[k] = current;
        }
        if k > 0 && k.is_multiple_of(2) {
            norm += current;
        }
    }
    let total = 2.0 * norm + current;
    for (o, t) in out.iter_mut().zip(&tmp) {
        *o = t / total;
    }
    out
}

fn start_order(n: usize, x: f64) -> usize {
    let base = (n as f64).max(x.ceil());
    let m = (base + 30.0 + 10.0 * base.sqrt()) as usize;
    m + (m % 2)
}

fn bessel_j_nonneg(n: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let start = start_order(n, x);
    let two_over_x = 2.0 / x;
    let mut above = 0.0;
    let mut current = 1.0;
    let mut norm = 0.0;
    let mut value = 0.0;
    let mut k = start;
    while k > 0 {
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        k -= 1;
        if current.abs() > RESCALE_ABOVE {
            current *= RESCALE_BY;
            above *= RESCALE_BY;
            norm *= RESCALE_BY;
            value *= RESCALE_BY;
        }
        if k == n {
            value = current;
        }
        if k > 0 && k.is_multiple_of(2) {
            norm += current;
        }
    }
    value / (2.0 * norm + current)
}

/// ln I_n(x) for x > 0, by Miller's downward recurrence normalized by I_0 + 2 sum_k I_k = e^x.
pub fn log_bessel_i(n: usize, x: f64) -> Result<f64> {
    if n > MAX_ORDER as usize {
        return Err(Error::domain(format!("Bessel order {n} exceeds {MAX_ORDER}")));
    }
    if !(x > 0.0) || x > MAX_ARGUMENT {
        return Err(Error::domain(format!("modified Bessel argument {x} must lie in (0, {MAX_ARGUMENT}]")));
    }
    let start = start_order(n, x);
    let two_over_x = 2.0 / x;
    let mut above = 0.0;
    let mut current = 1e-300;
    let mut norm = 0.0;
    let mut value = 0.0;
    let mut k = start;
    while k > 0 {
        let below = k as f64 * two_over_x * current + above;
        above = current;
        current = below;
        k -= 1;
        if current > RESCALE_ABOVE {
            current *= RESCALE_BY;
            above *= RESCALE_BY;
            norm *= RESCALE_BY;
            value *= RESCALE_BY;
        }
        if k == n {
            value = current;
        }
        if k > 0 {
            norm += current;
        }
    }
    Ok(value.ln() - (2.0 * norm + current).ln() + x)
}

/// Coefficient c_n of the Laurent series exp(p t + q / t) = sum_n c_n t^n, real p and q.
///
/// c_n = sum_k p^(n+k) q^k / ((n+k)! k!), which is (p/q)^(n/2) I_n(2 sqrt(pq)) for pq > 0 and the
/// J_n analogue for pq < 0; small |pq| is summed directly.
pub fn laurent_exponential_coefficient(n: i32, p: f64, q: f64) -> Result<f64> {
    if n.abs() > MAX_ORDER {
        return Err(Error::domain(format!("Laurent order {n} exceeds |n| <= {MAX_ORDER}")));
    }
    if !(p.is_finite() && q.is_finite()) {
        return Err(Error::domain(format!("Laurent parameters must be finite, got p = {p}, q = {q}")));
    }
    let (n, p, q) = if n < 0 { (n.unsigned_abs() as usize, q, p) } else { (n as usize, p, q) };
    if p == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let sign = if p < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let z = p * q;
    if z.abs() <= 1.0 {
        // p^n / n! times sum_k z^k n! / (k! (n+k)!)
        let lead = n as f64 * p.abs().ln() - ln_factorial(n);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..100 {
            term *= z / (k as f64 * (n + k) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return Ok(sign * lead.exp() * sum);
    }
    let half_log_ratio = 0.5 * n as f64 * (p / q).abs().ln();
    let x = 2.0 * z.abs().sqrt();
    if z > 0.0 {
        Ok(sign * (half_log_ratio + log_bessel_i(n, x)?).exp())
    } else {
        let j = bessel_j(n as i32, x)?;
        if j == 0.0 {
            return Ok(0.0);
        }
        Ok(sign * j.signum() * (half_log_ratio + j.abs().ln()).exp())
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}
