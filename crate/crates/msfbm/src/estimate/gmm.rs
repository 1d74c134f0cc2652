//! Two-step GMM calibration of marginals, pairs and panels.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{CovCurve, Kernel, LagUnit};
use crate::model::{validate, Matrix, ModelParams, PairParams};

use super::empirical::{cross_cov_at, increment_contributions, level_contributions, mean_fill};
use super::hac::{default_bandwidth, newey_west_weight};
use super::optim::{nelder_mead, NmOptions};
use super::LagGrid;

/// Which sample statistic is matched to which model quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MomentKind {
    /// `C(k)` at lag 0 and the grid against the exact expectation of the
    /// estimator under the model, which accounts for the sample-mean
    /// subtraction.
    LevelFiniteSample,
    /// `C(k)` against the block covariance `lambda_i lambda_j C^Omega(k)`.
    Level,
    /// `N/(N-k) C(k) - C(0)` at the grid lags against `C^Omega(k) -
    /// C^Omega(0)`. Insensitive to the unknown mean, and the default.
    #[default]
    Increment,
}

/// How `T` enters a univariate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TSpec {
    Fixed(f64),
    /// Estimated in `[N delta, max]`.
    Free { max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub grid: LagGrid,
    pub moments: MomentKind,
    /// HAC bandwidth; `floor(N^(1/3))` when absent.
    pub bandwidth: Option<usize>,
    /// Run the HAC-weighted second step.
    pub two_step: bool,
    pub max_iter: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            grid: LagGrid::default(),
            moments: MomentKind::default(),
            bandwidth: None,
            two_step: true,
            max_iter: 500,
        }
    }
}

/// Estimates and diagnostics of one GMM fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmResult {
    pub params: BTreeMap<String, f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub simplex_diameter: f64,
    pub moments: MomentKind,
    pub n: usize,
    /// Weight of the final step.
    pub weight: Matrix,
    /// The HAC covariance was degenerate and the identity was used.
    pub weight_fallback: bool,
    /// Sample statistic minus model at the optimum, `(x, y)` direction.
    pub residuals: CovCurve,
    /// Same for the `(y, x)` direction of a pair fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals_reverse: Option<CovCurve>,
    /// Spread of the estimates over Monte-Carlo replicas, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_proxy: Option<BTreeMap<String, f64>>,
}

impl GmmResult {
    /// Estimate `name`; panics when the fit has no such parameter.
    pub fn get(&self, name: &str) -> f64 {
        self.params[name]
    }
}

/// Estimated marginal parameters, the input of a pair fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub h: f64,
    pub lambda2: f64,
}

impl Marginal {
    pub fn from_result(r: &GmmResult) -> Self {
        Marginal { h: r.get("H"), lambda2: r.get("lambda2") }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x.clamp(-40.0, 40.0)).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Block covariances `c(h)`, `h = 0, 1, ...`, until they vanish for good
/// (beyond `T + delta`) or `n` terms.
pub fn block_sequence(kernel: &Kernel, delta: f64, n: usize) -> Vec<f64> {
    let last = ((kernel.t() / delta).ceil() as usize + 1).min(n.saturating_sub(1));
    (0..=last).map(|h| kernel.block_cov(h as f64 * delta, delta)).collect()
}

/// Expectation of the `1/N`, mean-corrected sample cross-covariance of two
/// length-`n` sequences whose cross-covariance `c(h)` is even in `h` and
/// zero from `c.len()` on.
pub fn expected_sample_cov(c: &[f64], n: usize, lags: &[usize]) -> Vec<f64> {
    let at = |h: usize| c.get(h).copied().unwrap_or(0.0);
    // s[m] = c(0) + ... + c(m - 1)
    let mut s = vec![0.0; n + 1];
    for m in 1..=n {
        s[m] = s[m - 1] + at(m - 1);
    }
    let nf = n as f64;
    // a(l) = (1/N) sum_{h = 1-l}^{N-l} c(h), l = 1..=N; prefix sums in pa.
    let mut pa = vec![0.0; n + 1];
    for l in 1..=n {
        let a = (s[l] + s[n - l + 1] - at(0)) / nf;
        pa[l] = pa[l - 1] + a;
    }
    let v = pa[n] / nf;
    lags.iter()
        .map(|&k| {
            let cross = pa[n - k] + (pa[n] - pa[k]);
            (nf - k as f64) / nf * (at(k) + v) - cross / nf
        })
        .collect()
}

/// Moment layout of one fit: forward lags on `(x, y)`, reverse lags on
/// `(y, x)`.
struct Layout {
    forward: Vec<usize>,
    reverse: Vec<usize>,
    kind: MomentKind,
    n: usize,
}

impl Layout {
    fn new(grid: &LagGrid, kind: MomentKind, n: usize, pair: bool) -> Self {
        let forward = match kind {
            MomentKind::Increment => grid.taus.clone(),
            _ => grid.with_zero(),
        };
        let reverse = if pair { grid.taus.clone() } else { Vec::new() };
        Layout { forward, reverse, kind, n }
    }

    fn len(&self) -> usize {
        self.forward.len() + self.reverse.len()
    }

    fn data(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let stat = |a: &[f64], b: &[f64], lags: &[usize]| -> Result<Vec<f64>> {
            match self.kind {
                MomentKind::Increment => {
                    let mut with0 = vec![0];
                    with0.extend_from_slice(lags);
                    let c = cross_cov_at(a, b, &with0)?;
                    let nf = self.n as f64;
                    Ok(lags.iter().enumerate().map(|(k, &l)| nf / (nf - l as f64) * c[k + 1] - c[0]).collect())
                }
                _ => cross_cov_at(a, b, lags),
            }
        };
        let mut out = stat(x, y, &self.forward)?;
        if !self.reverse.is_empty() {
            out.extend(stat(y, x, &self.reverse)?);
        }
        Ok(out)
    }

    fn contributions(&self, x: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
        let rows = |a: &[f64], b: &[f64], lags: &[usize]| match self.kind {
            MomentKind::Increment => increment_contributions(a, b, lags),
            _ => level_contributions(a, b, lags),
        };
        let mut out = rows(x, y, &self.forward);
        if !self.reverse.is_empty() {
            out.extend(rows(y, x, &self.reverse));
        }
        out
    }

    /// Model moments for the block covariance sequence `c`.
    fn model(&self, c: &[f64]) -> Vec<f64> {
        let at = |h: usize| c.get(h).copied().unwrap_or(0.0);
        let one = |lags: &[usize]| -> Vec<f64> {
            match self.kind {
                MomentKind::LevelFiniteSample => expected_sample_cov(c, self.n, lags),
                MomentKind::Level => lags.iter().map(|&k| at(k)).collect(),
                MomentKind::Increment => lags.iter().map(|&k| at(k) - at(0)).collect(),
            }
        };
        let mut out = one(&self.forward);
        if !self.reverse.is_empty() {
            // c is even, so the reverse direction has the same expectation.
            out.extend(one(&self.reverse));
        }
        out
    }

    fn residual_curves(&self, r: &[f64], meta: &str) -> Result<(CovCurve, Option<CovCurve>)> {
        let nf = self.forward.len();
        let fwd = CovCurve::new(
            self.forward.iter().map(|&k| k as f64).collect(),
            r[..nf].to_vec(),
            LagUnit::Steps,
            format!("{meta} residuals"),
        )?;
        let rev = if self.reverse.is_empty() {
            None
        } else {
            Some(CovCurve::new(
                self.reverse.iter().map(|&k| k as f64).collect(),
                r[nf..].to_vec(),
                LagUnit::Steps,
                format!("{meta} residuals, reversed"),
            )?)
        };
        Ok((fwd, rev))
    }
}

fn quad_form(r: &[f64], w: &Matrix) -> f64 {
    let mut s = 0.0;
    for (i, ri) in r.iter().enumerate() {
        let wi = &w[i];
        let mut acc = 0.0;
        for (j, rj) in r.iter().enumerate() {
            acc += wi[j] * rj;
        }
        s += ri * acc;
    }
    s
}

fn identity(q: usize) -> Matrix {
    (0..q).map(|i| (0..q).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

struct Fit {
    x: Vec<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
    diameter: f64,
    weight: Matrix,
    fallback: bool,
}

/// Identity-weighted fit from each start, then one HAC-weighted fit from
/// the best first-step point.
fn two_step<F>(
    layout: &Layout,
    x: &[f64],
    y: &[f64],
    starts: &[Vec<f64>],
    opts: &CalibrationOptions,
    model: F,
) -> Result<Fit>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let data = layout.data(x, y)?;
    let q = layout.len();
    let objective = |w: &Matrix| {
        let data = &data;
        let model = &model;
        let w = w.clone();
        move |p: &[f64]| match model(p) {
            Some(m) => {
                let r: Vec<f64> = data.iter().zip(&m).map(|(a, b)| a - b).collect();
                quad_form(&r, &w)
            }
            None => f64::INFINITY,
        }
    };
    let nm = NmOptions { max_iter: opts.max_iter, ..NmOptions::default() };
    let id = identity(q);
    let f1 = objective(&id);
    let mut best: Option<super::optim::Minimum> = None;
    let mut iterations = 0;
    for s in starts {
        let m = nelder_mead(&f1, s, nm);
        iterations += m.iterations;
        let better = match &best {
            None => true,
            Some(b) => m.value < b.value,
        };
        if better {
            best = Some(m);
        }
    }
    let first = best.ok_or_else(|| Error::Calibration("no starting point".into()))?;
    if !opts.two_step {
        return Ok(Fit {
            x: first.x,
            objective: first.value,
            iterations,
            converged: first.converged,
            diameter: first.diameter,
            weight: id,
            fallback: false,
        });
    }
    let bw = opts.bandwidth.unwrap_or_else(|| default_bandwidth(layout.n));
    let hac = newey_west_weight(&layout.contributions(x, y), bw)?;
    // Rescaling W leaves the minimizer unchanged and keeps objective values
    // comparable across fits.
    let tr: f64 = (0..q).map(|i| hac.w[i][i]).sum();
    let w: Matrix = hac.w.iter().map(|row| row.iter().map(|v| v * q as f64 / tr).collect()).collect();
    let f2 = objective(&w);
    let second = nelder_mead(&f2, &first.x, nm);
    iterations += second.iterations;
    Ok(Fit {
        x: second.x,
        objective: second.value,
        iterations,
        converged: second.converged,
        diameter: second.diameter,
        weight: w,
        fallback: hac.fallback,
    })
}

fn check_series(x: &[f64], grid: &LagGrid, what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{what} contains non-finite values")));
    }
    if x.len() <= grid.max_lag() + 1 {
        return Err(domain(format!("{what} has {} points, need more than {}", x.len(), grid.max_lag() + 1)));
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
    if !(var > 1e-300) || var <= 1e-24 * m * m {
        return Err(Error::Calibration(format!("{what} is a zero-variance series")));
    }
    Ok(())
}

/// Fits `(H, lambda^2)` and, with [`TSpec::Free`], `T` to a log-volatility
/// series sampled at step `delta`.
///
/// `H = H_max sigma(p0)`, `lambda^2 = exp(p1)`; the search starts at
/// `H = 0.1`, `lambda^2 = 0.05`.
pub fn calibrate_univariate(logvol: &[f64], delta: f64, t: TSpec, opts: &CalibrationOptions) -> Result<GmmResult> {
    check_series(logvol, &opts.grid, "log-volatility series")?;
    if !(delta > 0.0) {
        return Err(domain("delta must be positive"));
    }
    let n = logvol.len();
    let t_min = n as f64 * delta;
    match t {
        TSpec::Fixed(v) if !(v > 0.0) => return Err(domain("T must be positive")),
        TSpec::Free { max } if !(max > t_min) => {
            return Err(domain(format!("T range [{t_min}, {max}] is empty")))
        }
        _ => {}
    }
    let layout = Layout::new(&opts.grid, opts.moments, n, false);
    let decode = |p: &[f64]| -> (f64, f64, f64) {
        let h = 0.5 * sigmoid(p[0]);
        let l2 = p[1].clamp(-700.0, 700.0).exp();
        let tv = match t {
            TSpec::Fixed(v) => v,
            TSpec::Free { max } => t_min + (max - t_min) * sigmoid(p[2]),
        };
        (h, l2, tv)
    };
    let model = |p: &[f64]| -> Option<Vec<f64>> {
        let (h, l2, tv) = decode(p);
        if !(h > 0.0 && h < 0.5) {
            return None;
        }
        let k = Kernel::power(&PairParams::diagonal(h, l2, tv)).ok()?;
        Some(layout.model(&block_sequence(&k, delta, n)))
    };
    let mut start = vec![logit(0.2), 0.05f64.ln()];
    if let TSpec::Free { .. } = t {
        start.push(0.0);
    }
    let fit = two_step(&layout, logvol, logvol, &[start], opts, model)?;
    let (h, l2, tv) = decode(&fit.x);
    let k = Kernel::power(&PairParams::diagonal(h, l2, tv))?;
    let r: Vec<f64> = layout
        .data(logvol, logvol)?
        .iter()
        .zip(layout.model(&block_sequence(&k, delta, n)))
        .map(|(a, b)| a - b)
        .collect();
    let (residuals, _) = layout.residual_curves(&r, "univariate")?;
    let params = BTreeMap::from([("H".to_string(), h), ("lambda2".to_string(), l2), ("T".to_string(), tv)]);
    Ok(GmmResult {
        params,
        objective: fit.objective,
        iterations: fit.iterations,
        converged: fit.converged,
        simplex_diameter: fit.diameter,
        moments: opts.moments,
        n,
        weight: fit.weight,
        weight_fallback: fit.fallback,
        residuals,
        residuals_reverse: None,
        se_proxy: None,
    })
}

/// Fits `(g_ij, H_ij)` to two aligned log-volatility series given their
/// marginal parameters.
///
/// `g = tanh(u)` and `H_ij = Hbar + (1/2 - Hbar) sigma(v)`, so every
/// iterate is admissible. Both directions `(x, y)` and `(y, x)` enter the
/// moment vector. Starts at `g = 0.5` with `v` in `{-3, -1, 1}`. The
/// result also carries `xi_ij = g lambda_i lambda_j`.
pub fn calibrate_pair(
    x: &[f64],
    y: &[f64],
    mi: Marginal,
    mj: Marginal,
    delta: f64,
    t: f64,
    opts: &CalibrationOptions,
) -> Result<GmmResult> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("series lengths {} and {} differ", x.len(), y.len())));
    }
    check_series(x, &opts.grid, "first series")?;
    check_series(y, &opts.grid, "second series")?;
    for m in [mi, mj] {
        if !(m.h > 0.0 && m.h < 0.5 && m.lambda2 > 0.0) {
            return Err(Error::Inadmissible(format!("marginal H={} lambda2={}", m.h, m.lambda2)));
        }
    }
    if !(delta > 0.0 && t > 0.0) {
        return Err(domain("delta and T must be positive"));
    }
    let n = x.len();
    let h_bar = 0.5 * (mi.h + mj.h);
    let layout = Layout::new(&opts.grid, opts.moments, n, true);
    let decode = |p: &[f64]| -> (f64, f64) {
        let g = p[0].clamp(-18.0, 18.0).tanh();
        let hij = h_bar + (0.5 - h_bar) * sigmoid(p[1].clamp(-30.0, 30.0));
        (g, hij.min(0.5 - 1e-12))
    };
    let pair_of = |g: f64, hij: f64| PairParams {
        g,
        h_ij: hij,
        lambda_i2: mi.lambda2,
        lambda_j2: mj.lambda2,
        h_i: mi.h,
        h_j: mj.h,
        t,
    };
    let model = |p: &[f64]| -> Option<Vec<f64>> {
        let (g, hij) = decode(p);
        let k = Kernel::power(&pair_of(g, hij)).ok()?;
        Some(layout.model(&block_sequence(&k, delta, n)))
    };
    let u0 = 0.5f64.atanh();
    let starts: Vec<Vec<f64>> = [-3.0, -1.0, 1.0].iter().map(|&v| vec![u0, v]).collect();
    let fit = two_step(&layout, x, y, &starts, opts, model)?;
    let (g, hij) = decode(&fit.x);
    let k = Kernel::power(&pair_of(g, hij))?;
    let r: Vec<f64> = layout
        .data(x, y)?
        .iter()
        .zip(layout.model(&block_sequence(&k, delta, n)))
        .map(|(a, b)| a - b)
        .collect();
    let (residuals, rev) = layout.residual_curves(&r, "pair")?;
    let xi = g * (mi.lambda2 * mj.lambda2).sqrt();
    let params = BTreeMap::from([("g".to_string(), g), ("H_ij".to_string(), hij), ("xi_ij".to_string(), xi)]);
    Ok(GmmResult {
        params,
        objective: fit.objective,
        iterations: fit.iterations,
        converged: fit.converged,
        simplex_diameter: fit.diameter,
        moments: opts.moments,
        n,
        weight: fit.weight,
        weight_fallback: fit.fallback,
        residuals,
        residuals_reverse: rev,
        se_proxy: None,
    })
}

/// A fit that either produced a result or failed with a message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<GmmResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FitOutcome {
    fn from(r: Result<GmmResult>) -> Self {
        match r {
            Ok(v) => FitOutcome { result: Some(v), error: None },
            Err(e) => FitOutcome { result: None, error: Some(e.to_string()) },
        }
    }

    pub fn converged(&self) -> bool {
        self.result.as_ref().is_some_and(|r| r.converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub i: usize,
    pub j: usize,
    #[serde(flatten)]
    pub fit: FitOutcome,
}

/// Marginal and pairwise fits of a panel, assembled into matrices.
///
/// Entries whose fit failed are NaN (null in JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelCalibration {
    pub d: usize,
    pub n: usize,
    pub delta: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub marginals: Vec<FitOutcome>,
    pub pairs: Vec<PairOutcome>,
    #[serde(rename = "H")]
    pub h: Matrix,
    pub xi: Matrix,
    pub g: Matrix,
    /// Ascending eigenvalues of the assembled `xi`, when complete.
    pub xi_eigenvalues: Option<Vec<f64>>,
    /// Admissibility conditions the assembled parameters violate.
    pub violations: Vec<String>,
}

impl PanelCalibration {
    /// Fraction of pairs with a converged fit; 1 when there are none.
    pub fn converged_fraction(&self) -> f64 {
        if self.pairs.is_empty() {
            return 1.0;
        }
        self.pairs.iter().filter(|p| p.fit.converged()).count() as f64 / self.pairs.len() as f64
    }

    /// The assembled estimate, when every fit produced one.
    pub fn params(&self) -> Result<ModelParams> {
        if self.h.iter().chain(&self.xi).flatten().any(|v| !v.is_finite()) {
            return Err(Error::Calibration("some marginal or pair fits failed".into()));
        }
        ModelParams::new(self.t, self.h.clone(), self.xi.clone())
    }
}

/// Calibrates every marginal, then every pair `i < j`, in parallel.
///
/// `masks[i][l] = true` excludes observation `l` of row `i` from means and
/// covariances. A failed marginal fails only the pairs that involve it.
pub fn calibrate_panel(
    rows: &[Vec<f64>],
    masks: Option<&[Vec<bool>]>,
    delta: f64,
    t: f64,
    opts: &CalibrationOptions,
) -> Result<PanelCalibration> {
    let d = rows.len();
    if d == 0 {
        return Err(Error::Dimension("empty panel".into()));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("panel rows have different lengths".into()));
    }
    if let Some(m) = masks {
        if m.len() != d || m.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("mask shape differs from panel shape".into()));
        }
    }
    let filled: Vec<Result<Vec<f64>>> = (0..d)
        .map(|i| match masks {
            Some(m) => mean_fill(&rows[i], &m[i]),
            None => Ok(rows[i].clone()),
        })
        .collect();
    let marginals: Vec<FitOutcome> = (0..d)
        .into_par_iter()
        .map(|i| {
            FitOutcome::from(match &filled[i] {
                Ok(x) => calibrate_univariate(x, delta, TSpec::Fixed(t), opts),
                Err(e) => Err(Error::Data(e.to_string())),
            })
        })
        .collect();
    let pair_idx: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let pairs: Vec<PairOutcome> = pair_idx
        .par_iter()
        .map(|&(i, j)| {
            let fit = match (&marginals[i].result, &marginals[j].result, &filled[i], &filled[j]) {
                (Some(ri), Some(rj), Ok(x), Ok(y)) => FitOutcome::from(calibrate_pair(
                    x,
                    y,
                    Marginal::from_result(ri),
                    Marginal::from_result(rj),
                    delta,
                    t,
                    opts,
                )),
                _ => FitOutcome {
                    result: None,
                    error: Some(format!("skipped: marginal fit failed for {}", if marginals[i].result.is_none() { i } else { j })),
                },
            };
            PairOutcome { i, j, fit }
        })
        .collect();
    let mut h = vec![vec![f64::NAN; d]; d];
    let mut xi = vec![vec![f64::NAN; d]; d];
    let mut g = vec![vec![f64::NAN; d]; d];
    for (i, m) in marginals.iter().enumerate() {
        if let Some(r) = &m.result {
            h[i][i] = r.get("H");
            xi[i][i] = r.get("lambda2");
            g[i][i] = 1.0;
        }
    }
    for p in &pairs {
        if let Some(r) = &p.fit.result {
            for (a, b) in [(p.i, p.j), (p.j, p.i)] {
                h[a][b] = r.get("H_ij");
                xi[a][b] = r.get("xi_ij");
                g[a][b] = r.get("g");
            }
        }
    }
    let mut out = PanelCalibration {
        d,
        n,
        delta,
        t,
        marginals,
        pairs,
        h,
        xi,
        g,
        xi_eigenvalues: None,
        violations: Vec::new(),
    };
    if let Ok(p) = out.params() {
        out.xi_eigenvalues = Some(p.xi_eigenvalues());
        out.violations = validate(&p)?.violations.iter().map(|v| v.to_string()).collect();
    }
    Ok(out)
}
