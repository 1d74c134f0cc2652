//! Sample cross-covariances and the per-observation contributions used by
//! the HAC weight.

use crate::error::{domain, Error, Result};
use crate::kernels::{CovCurve, LagUnit};

use super::LagGrid;

fn check_pair(x: &[f64], y: &[f64], max_lag: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("series lengths {} and {} differ", x.len(), y.len())));
    }
    if max_lag >= x.len() {
        return Err(domain(format!("lag {max_lag} is not below the series length {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data("series contains non-finite values".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn centered(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    x.iter().map(|v| v - m).collect()
}

/// `C(k) = (1/N) sum_{l < N-k} (x_l - m_x)(y_{l+k} - m_y)` at each lag.
///
/// The `1/N` normalization is kept at every lag.
pub fn cross_cov_at(x: &[f64], y: &[f64], lags: &[usize]) -> Result<Vec<f64>> {
    check_pair(x, y, lags.iter().copied().max().unwrap_or(0))?;
    let n = x.len();
    let (xc, yc) = (centered(x), centered(y));
    Ok(lags
        .iter()
        .map(|&k| xc[..n - k].iter().zip(&yc[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect())
}

/// [`cross_cov_at`] on lag 0 and the grid lags.
///
/// Not symmetric in `(x, y)`: the curve of `(y, x)` is the same statistic
/// at negative lags.
pub fn empirical_cross_cov(x: &[f64], y: &[f64], grid: &LagGrid) -> Result<CovCurve> {
    let lags = grid.with_zero();
    let values = cross_cov_at(x, y, &lags)?;
    CovCurve::new(lags.iter().map(|&k| k as f64).collect(), values, LagUnit::Steps, "empirical cross-covariance")
}

/// Copy of `x` with masked entries replaced by the mean of the others, so
/// that they drop out of the centered products.
pub fn mean_fill(x: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if mask.len() != x.len() {
        return Err(Error::Dimension("mask length differs from series length".into()));
    }
    let (s, c) = x.iter().zip(mask).filter(|(_, &m)| !m).fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    if c == 0 {
        return Err(Error::Data("series is fully masked".into()));
    }
    let m = s / c as f64;
    Ok(x.iter().zip(mask).map(|(&v, &k)| if k { m } else { v }).collect())
}

/// `D(k) = C(k) - C(0)`.
pub fn d_statistic(curve: &CovCurve) -> Result<CovCurve> {
    let c0 = curve.at(0.0).ok_or_else(|| Error::Data("curve has no lag 0".into()))?;
    Ok(CovCurve {
        lags: curve.lags.clone(),
        values: curve.values.iter().map(|v| v - c0).collect(),
        unit: curve.unit,
        meta: format!("D statistic of {}", curve.meta),
    })
}

/// Per-observation contributions `u_l(k) = (x_l - m_x)(y_{l+k} - m_y)`
/// (zero past `N - k`), one row per lag; row means are the statistics of
/// [`cross_cov_at`].
pub fn level_contributions(x: &[f64], y: &[f64], lags: &[usize]) -> Vec<Vec<f64>> {
    let n = x.len();
    let (xc, yc) = (centered(x), centered(y));
    lags.iter()
        .map(|&k| {
            let mut row = vec![0.0; n];
            for l in 0..n - k {
                row[l] = xc[l] * yc[l + k];
            }
            row
        })
        .collect()
}

/// Contributions to `N/(N-k) C(k) - C(0)` at the positive lags.
pub fn increment_contributions(x: &[f64], y: &[f64], lags: &[usize]) -> Vec<Vec<f64>> {
    let n = x.len();
    let (xc, yc) = (centered(x), centered(y));
    lags.iter()
        .map(|&k| {
            let scale = n as f64 / (n - k) as f64;
            (0..n)
                .map(|l| {
                    let lagged = if l + k < n { xc[l] * yc[l + k] * scale } else { 0.0 };
                    lagged - xc[l] * yc[l]
                })
                .collect()
        })
        .collect()
}
