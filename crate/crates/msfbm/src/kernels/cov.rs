//! Covariance kernels of the field and of its block integrals.
//!
//! Every kernel `k` here is even, so its block integrals can all be written
//! with one even function `phi` satisfying `phi'' = k` and
//! `phi(0) = phi'(0) = 0`:
//!
//! ```text
//! int_a^b int_c^d k(u - v) dv du = phi(b-c) - phi(a-c) - phi(b-d) + phi(a-d)
//! ```
//!
//! ```
//! use msfbm::kernels::{integrated_cov, msfbm_cross_cov, KernelArgs};
//! use msfbm::model::PairParams;
//!
//! let pair = PairParams::diagonal(0.02, 0.05, 16384.0);
//! let c0 = msfbm_cross_cov(0.0, &pair).unwrap();
//! assert!((c0 - 0.05 / (2.0 * 0.02 * 0.96)).abs() < 1e-12);
//!
//! // Block covariance of the normalized field over two adjacent unit blocks.
//! let c = integrated_cov(&KernelArgs { tau: 1.0, delta: 1.0, pair }).unwrap();
//! assert!(c > 0.0);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::PairParams;

/// The three coefficients of the cross-covariance bracket
/// `A - B x^(2 H_ij) - C x`, `x = tau / T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `2 H_ij`.
    pub two_h: f64,
}

impl Bracket {
    pub fn new(h_ij: f64, h_bar: f64) -> Result<Self> {
        if !(h_ij > 0.0 && h_ij < 0.5) {
            return Err(domain(format!("co-Hurst {h_ij} outside (0, 1/2)")));
        }
        if !(0.0..0.5).contains(&h_bar) {
            return Err(domain(format!("mean Hurst {h_bar} outside [0, 1/2)")));
        }
        let (a2, b2) = (2.0 * h_ij, 2.0 * h_bar);
        Ok(Bracket {
            a: (1.0 + a2 - b2) / (a2 * (1.0 - b2)),
            b: 1.0 / (a2 * (1.0 - a2)),
            c: (a2 - b2) / ((a2 - 1.0) * (1.0 - b2)),
            two_h: a2,
        })
    }

    /// Bracket at `x = tau / T`, zero for `x >= 1`.
    pub fn eval(&self, x: f64) -> f64 {
        if x >= 1.0 {
            0.0
        } else {
            self.a - self.b * x.powf(self.two_h) - self.c * x
        }
    }
}

/// A stationary covariance kernel, including its amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `xi (A - B (tau/T)^(2H_ij) - C tau/T)` on `[0, T)`.
    Power { xi: f64, bracket: Bracket, t: f64 },
    /// Cut-off logarithmic kernel with cut-off `ell`.
    Log { xi: f64, ell: f64, t: f64 },
}

impl Kernel {
    /// Power kernel of the pair, with amplitude `xi = g lambda_i lambda_j`.
    pub fn power(pair: &PairParams) -> Result<Self> {
        Ok(Kernel::Power {
            xi: pair.xi(),
            bracket: Bracket::new(pair.h_ij, pair.h_bar())?,
            t: pair.t,
        })
    }

    /// Kernel of a pair, switching to the log kernel with cut-off `ell` when
    /// the co-Hurst exponent is zero.
    pub fn for_pair(pair: &PairParams, ell: f64) -> Result<Self> {
        if pair.h_ij == 0.0 {
            if ell >= pair.t {
                return Err(domain(format!("log kernel cut-off {ell} must be below T={}", pair.t)));
            }
            Ok(Kernel::Log { xi: pair.xi(), ell, t: pair.t })
        } else {
            Kernel::power(pair)
        }
    }

    /// The same kernel with unit amplitude scale replaced by `xi`.
    pub fn with_xi(self, new_xi: f64) -> Self {
        match self {
            Kernel::Power { bracket, t, .. } => Kernel::Power { xi: new_xi, bracket, t },
            Kernel::Log { ell, t, .. } => Kernel::Log { xi: new_xi, ell, t },
        }
    }

    pub fn t(&self) -> f64 {
        match *self {
            Kernel::Power { t, .. } | Kernel::Log { t, .. } => t,
        }
    }

    /// `k(tau)`.
    pub fn value(&self, tau: f64) -> f64 {
        let x = tau.abs();
        match *self {
            Kernel::Power { xi, bracket, t } => xi * bracket.eval(x / t),
            Kernel::Log { xi, ell, t } => {
                if x >= t {
                    0.0
                } else if x < ell {
                    -xi * ((ell / t).ln() - 1.0 + x / ell)
                } else {
                    -xi * (x / t).ln()
                }
            }
        }
    }

    /// Even second antiderivative `phi` with `phi(0) = phi'(0) = 0`.
    pub fn phi(&self, x: f64) -> f64 {
        let x = x.abs();
        let t = self.t();
        if x <= t {
            self.phi_inner(x)
        } else {
            self.phi_inner(t) + (x - t) * self.dphi_inner(t)
        }
    }

    fn phi_inner(&self, x: f64) -> f64 {
        match *self {
            Kernel::Power { xi, bracket: br, t } => {
                let p = br.two_h;
                xi * (br.a * x * x / 2.0
                    - br.b * x.powf(p + 2.0) / (t.powf(p) * (p + 1.0) * (p + 2.0))
                    - br.c * x.powi(3) / (6.0 * t))
            }
            Kernel::Log { xi, ell, t } => {
                let c0 = (ell / t).ln() - 1.0;
                if x <= ell {
                    -xi * (c0 * x * x / 2.0 + x.powi(3) / (6.0 * ell))
                } else {
                    let g1 = |u: f64| u * (u / t).ln() - u;
                    let g2 = |u: f64| u * u / 2.0 * (u / t).ln() - 0.75 * u * u;
                    let phi_l = -xi * (c0 * ell * ell / 2.0 + ell * ell / 6.0);
                    let dphi_l = -xi * (c0 * ell + ell / 2.0);
                    phi_l + dphi_l * (x - ell) - xi * (g2(x) - g2(ell) - g1(ell) * (x - ell))
                }
            }
        }
    }

    fn dphi_inner(&self, x: f64) -> f64 {
        match *self {
            Kernel::Power { xi, bracket: br, t } => {
                let p = br.two_h;
                xi * (br.a * x - br.b * x.powf(p + 1.0) / (t.powf(p) * (p + 1.0)) - br.c * x * x / (2.0 * t))
            }
            Kernel::Log { xi, ell, t } => {
                let c0 = (ell / t).ln() - 1.0;
                if x <= ell {
                    -xi * (c0 * x + x * x / (2.0 * ell))
                } else {
                    let g1 = |u: f64| u * (u / t).ln() - u;
                    -xi * (c0 * ell + ell / 2.0) - xi * (g1(x) - g1(ell))
                }
            }
        }
    }

    /// `int_a^b int_c^d k(u - v) dv du`.
    pub fn interval_integral(&self, (a, b): (f64, f64), (c, d): (f64, f64)) -> f64 {
        self.phi(b - c) - self.phi(a - c) - self.phi(b - d) + self.phi(a - d)
    }

    /// Covariance of the block averages `(1/delta) int_0^delta` and
    /// `(1/delta) int_tau^(tau+delta)` of a field with this kernel. Valid for
    /// every `tau >= 0`.
    pub fn block_cov(&self, tau: f64, delta: f64) -> f64 {
        let tau = tau.abs();
        (self.phi(tau + delta) + self.phi(tau - delta) - 2.0 * self.phi(tau)) / (delta * delta)
    }
}

/// Lag, aggregation scale and pair for the integrated kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelArgs {
    pub tau: f64,
    pub delta: f64,
    pub pair: PairParams,
}

fn check_pair(pair: &PairParams) -> Result<()> {
    pair.check()?;
    if pair.h_ij == 0.0 {
        return Err(domain("H_ij = 0: use log_kernel_cov for multifractal marginals"));
    }
    Ok(())
}

/// Cross-covariance `C_ij(tau)` of the field, zero beyond `T`.
pub fn msfbm_cross_cov(tau: f64, pair: &PairParams) -> Result<f64> {
    if !tau.is_finite() {
        return Err(domain(format!("lag {tau} is not finite")));
    }
    check_pair(pair)?;
    Ok(Kernel::power(pair)?.value(tau))
}

/// Univariate covariance `(nu^2/2)(1 - (tau/T)^(2H))`, zero beyond `T`.
pub fn sfbm_cov(tau: f64, lambda2: f64, h: f64, t: f64) -> f64 {
    let x = tau.abs() / t;
    if x >= 1.0 {
        return 0.0;
    }
    lambda2 / (2.0 * h * (1.0 - 2.0 * h)) * (1.0 - x.powf(2.0 * h))
}

/// Cut-off log kernel: linear on `[0, ell)`, `-xi ln(tau/T)` on
/// `[ell, T)`, zero beyond.
pub fn log_kernel_cov(tau: f64, ell: f64, xi: f64, t: f64) -> Result<f64> {
    if !(ell > 0.0 && ell < t) {
        return Err(domain(format!("log kernel needs 0 < ell < T, got ell={ell}, T={t}")));
    }
    Ok(Kernel::Log { xi, ell, t }.value(tau))
}

/// Scale-dependent noise correlation `g (h/T)^(2(H_ij - Hbar))`, equal to
/// `g` beyond `T`.
pub fn noise_correlation(h: f64, pair: &PairParams) -> Result<f64> {
    if !(h > 0.0) {
        return Err(domain(format!("scale {h} must be positive")));
    }
    pair.check()?;
    if h > pair.t {
        return Ok(pair.g);
    }
    Ok(pair.g * (h / pair.t).powf(2.0 * (pair.h_ij - pair.h_bar())))
}

/// Helper `f(z, alpha)` of the integrated kernel, in the form that never
/// divides by `tau`.
///
/// For `z = delta / tau < 1e-4` the second-order expansion
/// `(tau/T)^alpha (1 + alpha (alpha - 1) z^2 / 12)` is used.
pub fn f_aux(tau: f64, delta: f64, alpha: f64, t: f64) -> f64 {
    let denom = (1.0 + alpha) * (alpha + 2.0);
    if tau > 0.0 && delta / tau < 0.1 {
        // Binomial series of (1 + z)^p + (1 - z)^p - 2 over p (p - 1) z^2.
        let z2 = (delta / tau).powi(2);
        let p = alpha + 2.0;
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 2..40 {
            let k2 = 2.0 * k as f64;
            term *= (p - k2 + 2.0) * (p - k2 + 1.0) / ((k2 - 1.0) * k2) * z2;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return (tau / t).powf(alpha) * sum;
    }
    let p = alpha + 2.0;
    let num = (tau + delta).powf(p) + (tau - delta).abs().powf(p) - 2.0 * tau.powf(p);
    num / (t.powf(alpha) * delta * delta * denom)
}

/// Covariance of `Omega_i,delta(t)` and `Omega_j,delta(t + tau)` for the
/// normalized field, that is the double integral of `C_ij / (lambda_i
/// lambda_j)` over `[0, delta] x [tau, tau + delta]`.
///
/// Requires `tau + delta <= T`.
pub fn integrated_cov(args: &KernelArgs) -> Result<f64> {
    let KernelArgs { tau, delta, pair } = *args;
    check_pair(&pair)?;
    check_window(tau, delta, pair.t)?;
    let br = Bracket::new(pair.h_ij, pair.h_bar())?;
    Ok(pair.g * delta * delta * bracket_integrated(&br, tau, delta, pair.t))
}

fn bracket_integrated(br: &Bracket, tau: f64, delta: f64, t: f64) -> f64 {
    br.a - br.b * f_aux(tau, delta, br.two_h, t) - br.c * f_aux(tau, delta, 1.0, t)
}

fn check_window(tau: f64, delta: f64, t: f64) -> Result<()> {
    if !(tau >= 0.0) || !(delta > 0.0) {
        return Err(domain(format!("need tau >= 0 and delta > 0, got tau={tau}, delta={delta}")));
    }
    if tau + delta > t * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("tau + delta = {} exceeds T = {t}", tau + delta)));
    }
    Ok(())
}

/// Normalized increment structure `(C(0) - C(tau)) / (g delta^2)` of the
/// block-integrated field, that is the `phi~` function of the pair.
///
/// It already contains the `(tau/T)^(2H_ij)` scaling.
pub fn phi_tilde(tau: f64, delta: f64, pair: &PairParams) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(domain(format!("lag {tau} must be positive")));
    }
    let unit = PairParams { g: 1.0, ..*pair };
    check_pair(&unit)?;
    check_window(tau, delta, pair.t)?;
    let br = Bracket::new(pair.h_ij, pair.h_bar())?;
    let t = pair.t;
    // The constant A cancels in the difference.
    let f2 = f_aux(0.0, delta, br.two_h, t) - f_aux(tau, delta, br.two_h, t);
    let f1 = f_aux(0.0, delta, 1.0, t) - f_aux(tau, delta, 1.0, t);
    Ok(-br.b * f2 - br.c * f1)
}

/// Small-intermittency covariance of log-volatility increments over lag
/// `tau`, per unit `lambda_i lambda_j`: `2 g phi~`.
pub fn logvol_incr_cov(args: &KernelArgs) -> Result<f64> {
    let KernelArgs { tau, delta, pair } = *args;
    Ok(2.0 * pair.g * phi_tilde(tau, delta, &pair)?)
}

/// Small-intermittency correlation of the log-volatility increments of two
/// marginals.
pub fn logvol_incr_corr(tau: f64, delta: f64, pair: &PairParams) -> Result<f64> {
    let cross = phi_tilde(tau, delta, pair)?;
    let pi = phi_tilde(tau, delta, &PairParams::diagonal(pair.h_i, pair.lambda_i2, pair.t))?;
    let pj = phi_tilde(tau, delta, &PairParams::diagonal(pair.h_j, pair.lambda_j2, pair.t))?;
    if !(pi > 0.0 && pj > 0.0) {
        return Err(domain("vanishing marginal increment variance"));
    }
    Ok(pair.g * cross / (pi * pj).sqrt())
}
