//! Moment estimators and calibration.
//!
//! A log-volatility series `x_l = ln(M_delta(l delta) / delta)` is summarized by
//! its sample cross-covariances on a sparse lag grid. Marginals are fitted
//! first, then every pair with the marginals held fixed, each by two-step
//! GMM: identity weight, then a Newey-West weight.
//!
//! The estimator is studied in the literature for `H < 1/4`; it is exposed
//! for the whole range `0 < H < 1/2`.

mod empirical;
mod gmm;
mod hac;
mod mc;
mod optim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use empirical::{
    cross_cov_at, d_statistic, empirical_cross_cov, increment_contributions, level_contributions, mean_fill,
};
pub use gmm::{
    block_sequence, calibrate_pair, calibrate_panel, calibrate_univariate, expected_sample_cov, CalibrationOptions,
    FitOutcome, GmmResult, Marginal, MomentKind, PairOutcome, PanelCalibration, TSpec,
};
pub use hac::{default_bandwidth, newey_west_weight, HacWeight};
pub use mc::{calibrate_all, mc_validate, ols_slope, true_values, McConfig, McReport, McSize, ProxyMode, ReplicaFailure};
pub use optim::{nelder_mead, Minimum, NmOptions};

/// Positive, strictly increasing lags in units of the sampling step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagGrid {
    /// Largest exponent `Q` of the square-root rule; 0 for a hand-picked
    /// grid.
    pub q: usize,
    pub taus: Vec<usize>,
}

impl Default for LagGrid {
    /// `floor(sqrt(2^k))` for `k = 0..=19`, deduplicated: 18 lags from 1
    /// to 724.
    fn default() -> Self {
        LagGrid::sqrt_two(19)
    }
}

impl LagGrid {
    /// `floor(sqrt(2^k))` for `k = 0..=q`, duplicates removed.
    pub fn sqrt_two(q: usize) -> Self {
        let mut taus: Vec<usize> = (0..=q as u32)
            .map(|k| {
                let v = 1u128 << k;
                // Exact integer square root.
                let mut r = (v as f64).sqrt() as u128;
                while r * r > v {
                    r -= 1;
                }
                while (r + 1) * (r + 1) <= v {
                    r += 1;
                }
                r as usize
            })
            .collect();
        taus.dedup();
        LagGrid { q, taus }
    }

    pub fn from_lags(taus: Vec<usize>) -> Result<Self> {
        if taus.is_empty() || taus[0] == 0 || taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data("lags must be positive and strictly increasing".into()));
        }
        Ok(LagGrid { q: 0, taus })
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn max_lag(&self) -> usize {
        self.taus.last().copied().unwrap_or(0)
    }

    /// Lag 0 followed by the grid.
    pub fn with_zero(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.taus.len() + 1);
        v.push(0);
        v.extend_from_slice(&self.taus);
        v
    }

    /// The lags below `n`, for series too short for the full grid.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let taus: Vec<usize> = self.taus.iter().copied().filter(|&k| k < n).collect();
        if taus.is_empty() {
            return Err(Error::Domain(format!("no grid lag below {n}")));
        }
        Ok(LagGrid { q: self.q, taus })
    }
}
