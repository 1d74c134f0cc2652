//! Newey-West long-run covariance of moment contributions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::Matrix;

/// A long-run covariance `S` and the weight `W = (S + eps I)^-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HacWeight {
    pub s: Matrix,
    pub w: Matrix,
    pub bandwidth: usize,
    /// `S` had zero trace and `W` is the identity.
    pub fallback: bool,
}

/// `floor(n^(1/3))`, computed exactly.
pub fn default_bandwidth(n: usize) -> usize {
    let mut b = (n as f64).cbrt().floor() as usize;
    while (b + 1).pow(3) <= n {
        b += 1;
    }
    while b > 0 && b.pow(3) > n {
        b -= 1;
    }
    b
}

/// Bartlett-weighted long-run covariance of the rows of `contrib` (one row
/// per moment, one column per observation) and its regularized inverse,
/// `eps = 1e-10 trace(S) / Q`.
pub fn newey_west_weight(contrib: &[Vec<f64>], bandwidth: usize) -> Result<HacWeight> {
    let q = contrib.len();
    if q == 0 {
        return Err(Error::Dimension("no moment rows".into()));
    }
    let n = contrib[0].len();
    if contrib.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("moment rows have different lengths".into()));
    }
    if bandwidth >= n {
        return Err(domain(format!("bandwidth {bandwidth} needs more than {n} observations")));
    }
    let u: Vec<Vec<f64>> = contrib
        .iter()
        .map(|r| {
            let m = r.iter().sum::<f64>() / n as f64;
            r.iter().map(|v| v - m).collect()
        })
        .collect();
    let mut s = DMatrix::<f64>::zeros(q, q);
    for lag in 0..=bandwidth {
        let w = 1.0 - lag as f64 / (bandwidth + 1) as f64;
        for a in 0..q {
            for b in 0..q {
                let g: f64 = u[a][lag..].iter().zip(&u[b][..n - lag]).map(|(x, y)| x * y).sum::<f64>() / n as f64;
                if lag == 0 {
                    s[(a, b)] += g;
                } else {
                    s[(a, b)] += w * g;
                    s[(b, a)] += w * g;
                }
            }
        }
    }
    let s = (&s + s.transpose()) * 0.5;
    let to_vec = |m: &DMatrix<f64>| (0..q).map(|i| (0..q).map(|j| m[(i, j)]).collect()).collect::<Matrix>();
    let trace = s.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        let id = DMatrix::<f64>::identity(q, q);
        return Ok(HacWeight { s: to_vec(&s), w: to_vec(&id), bandwidth, fallback: true });
    }
    let eps = 1e-10 * trace / q as f64;
    let reg = &s + DMatrix::<f64>::identity(q, q) * eps;
    let inv = match reg.clone().cholesky() {
        Some(c) => c.inverse(),
        None => reg
            .try_inverse()
            .ok_or_else(|| Error::Calibration("HAC covariance is singular".into()))?,
    };
    let inv = (&inv + inv.transpose()) * 0.5;
    Ok(HacWeight { s: to_vec(&s), w: to_vec(&inv), bandwidth, fallback: false })
}
