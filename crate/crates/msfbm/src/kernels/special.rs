//! Incomplete gamma functions.
//!
//! ```
//! use msfbm::kernels::lower_incomplete_gamma;
//!
//! let g = lower_incomplete_gamma(1.0, 1.0).unwrap();
//! assert!((g - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
//! ```

use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Lower incomplete gamma `gamma(s, x) = int_0^x t^(s-1) e^(-t) dt`.
///
/// Power series below `x = s + 1`, Lentz continued fraction for the upper
/// function above it.
pub fn lower_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(domain(format!("incomplete gamma needs s > 0, got {s}")));
    }
    if !(x >= 0.0) {
        return Err(domain(format!("incomplete gamma needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(ln_gamma(s).exp());
    }
    if x < s + 1.0 {
        Ok((s * x.ln() - x).exp() * series_sum(s, x))
    } else {
        Ok(ln_gamma(s).exp() - (s * x.ln() - x).exp() * upper_cf(s, x))
    }
}

/// Regularized `P(s, x) = gamma(s, x) / Gamma(s)`.
pub fn regularized_lower_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !(x >= 0.0) {
        return Err(domain(format!("regularized gamma needs s > 0, x >= 0, got ({s}, {x})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        Ok((s * x.ln() - x - ln_gamma(s)).exp() * series_sum(s, x))
    } else {
        Ok(1.0 - (s * x.ln() - x - ln_gamma(s)).exp() * upper_cf(s, x))
    }
}

/// `sum_k x^k / (s (s+1) ... (s+k))`.
fn series_sum(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut a = s;
    for _ in 0..MAX_ITER {
        a += 1.0;
        term *= x / a;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Continued fraction for `Gamma(s, x) e^x x^(-s)`.
fn upper_cf(s: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Scaled lower gamma `gamma(s, y) / y^s`, continued analytically to `y < 0`.
///
/// Equals `int_0^1 t^(s-1) e^(-y t) dt`, so `b^s * scaled(s, L b)` is
/// `int_0^b u^(s-1) e^(-L u) du` for either sign of `L`.
pub fn scaled_lower_gamma(s: f64, y: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(domain(format!("scaled gamma needs s > 0, got {s}")));
    }
    if y == 0.0 {
        return Ok(1.0 / s);
    }
    if y < 0.0 {
        // All terms positive: sum_k |y|^k / (k! (s+k)).
        let z = -y;
        let mut fact = 1.0;
        let mut sum = 1.0 / s;
        for k in 1..MAX_ITER {
            fact *= z / k as f64;
            let term = fact / (s + k as f64);
            sum += term;
            if term < sum * EPS {
                break;
            }
        }
        return Ok(sum);
    }
    if y < s + 1.0 {
        Ok((-y).exp() * series_sum(s, y))
    } else {
        Ok((ln_gamma(s) - s * y.ln()).exp() - (-y).exp() * upper_cf(s, y))
    }
}
