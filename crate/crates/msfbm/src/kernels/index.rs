//! Log-volatility of a weighted index of assets.
//!
//! ```
//! use msfbm::kernels::index_ratio_bound;
//!
//! let b = index_ratio_bound(0.15, 0.0, 199.8, 999.0, 1000.0, 10).unwrap();
//! assert!((b.limit / 20.0 - 1.0).abs() < 0.1);
//! ```

use serde::{Deserialize, Serialize};

use super::cov::phi_tilde;
use crate::error::{domain, Error, Result};
use crate::model::ModelParams;

/// Split of the index increment variance into cross-asset and own-asset
/// parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexVariance {
    pub total: f64,
    /// Sum over `i != j`.
    pub cross: f64,
    /// Sum over `i == j`.
    pub own: f64,
}

/// Small-intermittency variance of the index log-volatility increments,
/// `sum_ij a_i^2 a_j^2 xi_ij phi~_ij`.
pub fn index_logvol_variance(weights: &[f64], params: &ModelParams, tau: f64, delta: f64) -> Result<f64> {
    Ok(index_variance_decomposition(weights, params, tau, delta)?.total)
}

/// [`index_logvol_variance`] with its two components.
pub fn index_variance_decomposition(
    weights: &[f64],
    params: &ModelParams,
    tau: f64,
    delta: f64,
) -> Result<IndexVariance> {
    params.check_shape()?;
    if weights.len() != params.d {
        return Err(Error::Dimension(format!("{} weights for d={}", weights.len(), params.d)));
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(domain("weights must be positive"));
    }
    if !(delta > 0.0 && delta < params.t && tau > 0.0 && tau < params.t) {
        return Err(domain(format!("need 0 < delta, tau < T, got delta={delta}, tau={tau}")));
    }
    let (mut cross, mut own) = (0.0, 0.0);
    for i in 0..params.d {
        for j in i..params.d {
            let xi = params.xi[i][j];
            if xi == 0.0 {
                continue;
            }
            let pair = params.pair(i, j)?;
            let w = (weights[i] * weights[j]).powi(2);
            let v = w * xi * phi_tilde(tau, delta, &pair)?;
            if i == j {
                own += v;
            } else {
                cross += 2.0 * v;
            }
        }
    }
    Ok(IndexVariance { total: cross + own, cross, own })
}

/// `C_H = H (1-2H)(1+2H)(1+H) / (2 (2^(2H) - 1))`.
pub fn c_h(h: f64) -> f64 {
    h * (1.0 - 2.0 * h) * (1.0 + 2.0 * h) * (1.0 + h) / (2.0 * ((2.0 * h).exp2() - 1.0))
}

/// Lower bounds on the ratio of the cross-asset to the own-asset part of
/// the index variance in the homogeneous model (`H_ij = H`, `H_i = H'`,
/// `g = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBound {
    /// `(d-1) (tau/T)^(2(H-H')) / r`, with `r = psi_H'(z) / psi_H(z)`.
    pub finite: f64,
    /// Closed form `(d-1) (tau/T)^(2H) C_H (3 - 2 ln z)` for `H' -> 0`.
    pub limit: f64,
    pub r: f64,
    pub c_h: f64,
}

/// Both forms of the index ratio bound at `z = delta / tau`.
///
/// The finite form keeps the leading high-frequency terms only: the part of
/// the cross kernel linear in `tau/T` is dropped.
pub fn index_ratio_bound(h: f64, h_prime: f64, delta: f64, tau: f64, t: f64, d: usize) -> Result<RatioBound> {
    if !(0.0 <= h_prime && h_prime < h && h < 0.5) {
        return Err(domain(format!("need 0 <= H' < H < 1/2, got H={h}, H'={h_prime}")));
    }
    if !(delta > 0.0 && delta < tau && tau < t) {
        return Err(domain(format!("need 0 < delta < tau < T, got {delta}, {tau}, {t}")));
    }
    if d == 0 {
        return Err(Error::Dimension("d must be at least 1".into()));
    }
    let z = delta / tau;
    let x = tau / t;
    let m = (d - 1) as f64;
    let r = psi(h_prime, z) / psi(h, z);
    let ch = c_h(h);
    Ok(RatioBound {
        finite: m * x.powf(2.0 * (h - h_prime)) / r,
        limit: m * x.powf(2.0 * h) * ch * (3.0 - 2.0 * z.ln()),
        r,
        c_h: ch,
    })
}

/// `phi~` of a single marginal without its `(tau/T)^(2H)` factor, as a
/// function of `z = delta / tau < 1`. `H = 0` is the limit `H -> 0`.
pub fn psi(h: f64, z: f64) -> f64 {
    if h == 0.0 {
        let head = if z < 1e-3 {
            1.5 - z * z / 12.0 - z.powi(4) / 60.0
        } else {
            ((1.0 + z).powi(2) * z.ln_1p() + (1.0 - z).powi(2) * (-z).ln_1p()) / (2.0 * z * z)
        };
        return head - z.ln();
    }
    let a = 2.0 * h;
    let denom = (1.0 + a) * (2.0 + a);
    let fhat = if z < 1e-4 {
        1.0 + a * (a - 1.0) * z * z / 12.0
    } else {
        ((1.0 + z).powf(a + 2.0) + (1.0 - z).abs().powf(a + 2.0) - 2.0) / (z * z * denom)
    };
    (fhat - 2.0 * z.powf(a) / denom) / (a * (1.0 - a))
}
