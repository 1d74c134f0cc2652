//! Gaussian moments and the leading small-intermittency log-moments.
//!
//! ```
//! use msfbm::kernels::wick_moment;
//!
//! let ones = vec![vec![1.0; 4]; 4];
//! assert_eq!(wick_moment(&ones).unwrap(), 3.0);
//! ```

use serde::{Deserialize, Serialize};

use super::cov::{Bracket, Kernel};
use crate::error::{domain, Error, Result};
use crate::model::{symmetric_eigenvalues, Matrix, ModelParams};

/// Largest moment order accepted by [`wick_moment`].
pub const WICK_MAX_ORDER: usize = 16;

/// Scaling exponent `zeta_ij(p, q) = p + q - xi (p + q)^2 / 2`.
pub fn zeta_exponent(p: f64, q: f64, xi_ij: f64) -> f64 {
    let s = p + q;
    s - xi_ij * s * s / 2.0
}

/// `E[X_1 ... X_n]` for a centered Gaussian vector with covariance `cov`:
/// the sum over perfect matchings of products of covariances.
///
/// Computed by dynamic programming over subsets, `O(2^n n)`.
pub fn wick_moment(cov: &Matrix) -> Result<f64> {
    let n = cov.len();
    if cov.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("covariance is not square".into()));
    }
    if n > WICK_MAX_ORDER {
        return Err(domain(format!("order {n} exceeds {WICK_MAX_ORDER}")));
    }
    let scale = cov.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(domain(format!("covariance not symmetric at ({i},{j})")));
            }
        }
    }
    if n > 0 {
        let trace: f64 = (0..n).map(|i| cov[i][i]).sum();
        let min = symmetric_eigenvalues(cov)[0];
        if min < -1e-10 * trace.abs().max(scale) {
            return Err(domain(format!("covariance not positive semidefinite (eigenvalue {min})")));
        }
    }
    if n % 2 == 1 {
        return Ok(0.0);
    }
    Ok(hafnian(cov))
}

fn hafnian(cov: &Matrix) -> f64 {
    let n = cov.len();
    let mut memo = vec![0.0; 1 << n];
    memo[0] = 1.0;
    for mask in 1usize..(1 << n) {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut acc = 0.0;
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            acc += cov[i][j] * memo[rest & !(1 << j)];
        }
        memo[mask] = acc;
    }
    memo[(1 << n) - 1]
}

/// One factor `ln(M_i(I) / |I|)` of a generalized log-moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFactor {
    pub marginal: usize,
    pub start: f64,
    pub end: f64,
}

impl LogFactor {
    pub fn new(marginal: usize, start: f64, end: f64) -> Self {
        LogFactor { marginal, start, end }
    }
}

/// Covariance of `Omega_i(I)/|I|` and `Omega_j(J)/|J|` for the normalized
/// field.
pub fn normalized_interval_cov(params: &ModelParams, a: &LogFactor, b: &LogFactor) -> Result<f64> {
    let (i, j) = (a.marginal, b.marginal);
    let pair = params.pair(i, j)?;
    if pair.h_ij == 0.0 {
        return Err(domain("H = 0 marginals have no normalized power-law field"));
    }
    let k = Kernel::Power { xi: pair.g, bracket: Bracket::new(pair.h_ij, pair.h_bar())?, t: params.t };
    let len_a = a.end - a.start;
    let len_b = b.end - b.start;
    Ok(k.interval_integral((a.start, a.end), (b.start, b.end)) / (len_a * len_b))
}

/// Leading small-intermittency term of `E[prod_k ln(M_(i_k)(I_k)/|I_k|)]`:
/// `prod_k lambda_(i_k)` times the Wick moment of the normalized block
/// averages.
///
/// All intervals must fit in one window of length `T`.
pub fn sia_generalized_moment(factors: &[LogFactor], params: &ModelParams) -> Result<f64> {
    if factors.is_empty() {
        return Ok(1.0);
    }
    for f in factors {
        if f.marginal >= params.d {
            return Err(Error::Dimension(format!("marginal {} out of range", f.marginal)));
        }
        if !(f.end > f.start) {
            return Err(domain(format!("empty interval [{}, {}]", f.start, f.end)));
        }
    }
    let lo = factors.iter().map(|f| f.start).fold(f64::INFINITY, f64::min);
    let hi = factors.iter().map(|f| f.end).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > params.t {
        return Err(domain(format!("intervals span {} > T = {}", hi - lo, params.t)));
    }
    let n = factors.len();
    if n > WICK_MAX_ORDER {
        return Err(domain(format!("{n} factors exceed {WICK_MAX_ORDER}")));
    }
    let mut cov = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let c = normalized_interval_cov(params, &factors[a], &factors[b])?;
            cov[a][b] = c;
            cov[b][a] = c;
        }
    }
    let lambdas: f64 = factors.iter().map(|f| params.xi[f.marginal][f.marginal].sqrt()).product();
    Ok(lambdas * wick_moment(&cov)?)
}
