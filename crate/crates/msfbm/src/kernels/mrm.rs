//! Cross moments `E[M_i,delta(t) M_j,delta(t + tau)]` of the volatility
//! measures.
//!
//! With `E[exp(omega_i)] = 1` the moment is the double integral of
//! `exp(C_ij(u - v))` over `[0, delta] x [tau, tau + delta]`. Writing
//! `C_ij(u) = xi A - K u^(2H_ij) - L u` gives
//!
//! ```text
//! M_ij int_(tau-delta)^(tau+delta) (delta - |w - tau|) exp(-K w^(2H_ij) - L w) dw
//! ```
//!
//! with `M_ij = exp(xi A)`, `K = xi B / T^(2H_ij)` and `L = xi C / T`. The
//! series expands `exp(-K w^(2H_ij))`; every term is then a pair of scaled
//! incomplete gamma functions. `L` vanishes on the diagonal and is negative
//! off it whenever `xi > 0`, which is why the scaled gamma is continued to
//! negative arguments.

use serde::{Deserialize, Serialize};

use super::cov::Bracket;
use super::special::scaled_lower_gamma;
use crate::error::{domain, Result};
use crate::model::PairParams;

/// Default relative stopping tolerance of the series.
pub const SERIES_TOL: f64 = 1e-12;
/// Default cap on the number of series terms.
pub const SERIES_MAX_TERMS: usize = 200;

/// Value of the series with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrmSeries {
    pub value: f64,
    /// `|last term| / |partial sum|` at the point the summation stopped.
    pub achieved_tol: f64,
    pub terms: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Constants {
    m: f64,
    k: f64,
    l: f64,
    two_h: f64,
}

fn constants(tau: f64, delta: f64, pair: &PairParams) -> Result<Constants> {
    pair.check()?;
    if pair.h_ij == 0.0 {
        return Err(domain("H_ij = 0 has no power-law expansion"));
    }
    if !(delta > 0.0 && delta < tau) {
        return Err(domain(format!("need 0 < delta < tau, got delta={delta}, tau={tau}")));
    }
    if tau + delta > pair.t * (1.0 + 1e-12) {
        return Err(domain(format!("tau + delta = {} exceeds T = {}", tau + delta, pair.t)));
    }
    let br = Bracket::new(pair.h_ij, pair.h_bar())?;
    let xi = pair.xi();
    Ok(Constants {
        m: (xi * br.a).exp(),
        k: xi * br.b / pair.t.powf(br.two_h),
        l: xi * br.c / pair.t,
        two_h: br.two_h,
    })
}

/// `int_0^x u^p e^(-L u) du`.
fn power_exp_integral(p: f64, l: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(x.powf(p + 1.0) * scaled_lower_gamma(p + 1.0, l * x)?)
}

/// `int_(tau-delta)^(tau+delta) (delta - |w - tau|) w^p e^(-L w) dw`.
fn tent_moment(p: f64, l: f64, tau: f64, delta: f64) -> Result<f64> {
    let (lo, hi) = (tau - delta, tau + delta);
    let g = |q: f64, a: f64, b: f64| -> Result<f64> {
        Ok(power_exp_integral(q, l, b)? - power_exp_integral(q, l, a)?)
    };
    let upper = hi * g(p, tau, hi)? - g(p + 1.0, tau, hi)?;
    let lower = g(p + 1.0, lo, tau)? - lo * g(p, lo, tau)?;
    Ok(upper + lower)
}

/// Series for `E[M_i,delta(t) M_j,delta(t + tau)]`, summed until a term
/// falls below `SERIES_TOL` relative to the partial sum or `n_terms` terms
/// have been added.
///
/// Requires `0 < delta < tau` and `tau + delta <= T`.
pub fn mrm_cross_cov_series(tau: f64, delta: f64, pair: &PairParams, n_terms: usize) -> Result<MrmSeries> {
    mrm_cross_cov_series_tol(tau, delta, pair, n_terms, SERIES_TOL)
}

/// [`mrm_cross_cov_series`] with an explicit stopping tolerance.
pub fn mrm_cross_cov_series_tol(
    tau: f64,
    delta: f64,
    pair: &PairParams,
    n_terms: usize,
    tol: f64,
) -> Result<MrmSeries> {
    if n_terms == 0 {
        return Err(domain("n_terms must be at least 1"));
    }
    let c = constants(tau, delta, pair)?;
    let mut sum = 0.0;
    let mut coef = 1.0;
    let mut ratio = f64::INFINITY;
    let mut used = 0;
    for n in 0..n_terms {
        if n > 0 {
            coef *= -c.k / n as f64;
        }
        let term = if coef == 0.0 { 0.0 } else { coef * tent_moment(c.two_h * n as f64, c.l, tau, delta)? };
        sum += term;
        used = n + 1;
        ratio = if sum != 0.0 { (term / sum).abs() } else { term.abs() };
        if n > 0 && ratio < tol {
            break;
        }
    }
    Ok(MrmSeries { value: c.m * sum, achieved_tol: ratio, terms: used, converged: ratio < tol })
}

/// First-order-in-`L` approximation of the same moment,
/// `M_ij [(I) - L (II)]`, where `(I)` and `(II)` are second differences of
/// `F(x) = x J0(x) - J1(x)` and `G(x) = x J1(x) - J2(x)` and
/// `Jn(x) = int_0^x z^n exp(-K z^(2H_ij)) dz`.
pub fn mrm_cross_cov_sia(tau: f64, delta: f64, pair: &PairParams) -> Result<f64> {
    let c = constants(tau, delta, pair)?;
    let j = |n: u32, x: f64| -> Result<f64> {
        let s = (n + 1) as f64 / c.two_h;
        Ok(x.powi(n as i32 + 1) * scaled_lower_gamma(s, c.k * x.powf(c.two_h))? / c.two_h)
    };
    let f = |x: f64| -> Result<f64> { Ok(x * j(0, x)? - j(1, x)?) };
    let g = |x: f64| -> Result<f64> { Ok(x * j(1, x)? - j(2, x)?) };
    let second = |h: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        Ok(h(tau + delta)? + h(tau - delta)? - 2.0 * h(tau)?)
    };
    let first = second(&f)?;
    let corr = if c.l == 0.0 { 0.0 } else { second(&g)? };
    Ok(c.m * (first - c.l * corr))
}
