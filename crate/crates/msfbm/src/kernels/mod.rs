//! Closed-form kernels: field covariances, block-integrated covariances,
//! volatility-measure moments, small-intermittency moments and index
//! aggregation.

mod cov;
mod curve;
mod index;
mod moments;
mod mrm;
mod special;

pub use cov::{
    f_aux, integrated_cov, log_kernel_cov, logvol_incr_corr, logvol_incr_cov, msfbm_cross_cov,
    noise_correlation, phi_tilde, sfbm_cov, Bracket, Kernel, KernelArgs,
};
pub use curve::{CovCurve, LagUnit};
pub use index::{
    c_h, index_logvol_variance, index_ratio_bound, index_variance_decomposition, psi, IndexVariance,
    RatioBound,
};
pub use moments::{
    normalized_interval_cov, sia_generalized_moment, wick_moment, zeta_exponent, LogFactor,
    WICK_MAX_ORDER,
};
pub use mrm::{
    mrm_cross_cov_series, mrm_cross_cov_series_tol, mrm_cross_cov_sia, MrmSeries, SERIES_MAX_TERMS,
    SERIES_TOL,
};
pub use special::{lower_incomplete_gamma, regularized_lower_gamma, scaled_lower_gamma};
