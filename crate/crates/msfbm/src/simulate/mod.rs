//! Simulation of the log-volatility field, the volatility measure and
//! prices.
//!
//! ```
//! use msfbm::model::ModelParams;
//! use msfbm::simulate::{field_to_measure, simulate_field};
//!
//! let params = ModelParams::bivariate(256.0, 0.05, 0.05, 0.15, 0.5);
//! let (paths, diag) = simulate_field(&params, 256, 1.0, 7, 2).unwrap();
//! assert_eq!(paths.len(), 2);
//! assert_eq!(diag.clipped_mass, 0.0);
//! let measure = field_to_measure(&paths[0], &params, 16).unwrap();
//! assert_eq!(measure.n, 16);
//! ```

mod embed;
mod panel;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::Kernel;
use crate::model::{mu, validate, ModelParams};

pub use embed::{
    embedding_size, CirculantSampler, EmbeddingDiagnostics, EmbeddingFlag, EXACT_CLIP_TOL, MAX_CLIP,
};
pub use panel::PANEL_MAGIC;

/// Stream offset separating price noise from field noise.
const PRICE_STREAM: u64 = 1 << 40;

/// What the rows of a [`FieldPanel`] hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Centered field samples `omega_i(k delta) - mu_i`.
    GaussianField,
    /// Log of the normalized measure `ln(M_i,delta / delta)`.
    LogvolMeasure,
    /// Block averages of the centered field.
    GaussianAverageProxy,
    /// Observed log-volatility proxies.
    Market,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::GaussianField => "gaussian-field",
            Provenance::LogvolMeasure => "logvol-measure",
            Provenance::GaussianAverageProxy => "gaussian-average-proxy",
            Provenance::Market => "market",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussian-field" => Provenance::GaussianField,
            "logvol-measure" => Provenance::LogvolMeasure,
            "gaussian-average-proxy" => Provenance::GaussianAverageProxy,
            "market" => Provenance::Market,
            other => return Err(Error::Data(format!("unknown provenance {other:?}"))),
        })
    }

    pub(crate) fn code(&self) -> u8 {
        match self {
            Provenance::GaussianField => 0,
            Provenance::LogvolMeasure => 1,
            Provenance::GaussianAverageProxy => 2,
            Provenance::Market => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => Provenance::GaussianField,
            1 => Provenance::LogvolMeasure,
            2 => Provenance::GaussianAverageProxy,
            3 => Provenance::Market,
            _ => return Err(Error::Data(format!("unknown provenance code {c}"))),
        })
    }
}

/// `d x N` samples on a uniform grid of step `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPanel {
    pub d: usize,
    pub n: usize,
    pub delta: f64,
    /// One row per marginal.
    pub data: Vec<Vec<f64>>,
    pub seed: u64,
    pub provenance: Provenance,
}

impl FieldPanel {
    pub fn new(data: Vec<Vec<f64>>, delta: f64, seed: u64, provenance: Provenance) -> Result<Self> {
        let p = FieldPanel { d: data.len(), n: data.first().map_or(0, Vec::len), delta, data, seed, provenance };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if self.d == 0 || self.data.len() != self.d {
            return Err(Error::Dimension(format!("panel has {} rows, d={}", self.data.len(), self.d)));
        }
        if self.n < 2 || self.data.iter().any(|r| r.len() != self.n) {
            return Err(Error::Dimension(format!("panel rows must all have N={} >= 2 samples", self.n)));
        }
        if !(self.delta > 0.0) {
            return Err(domain(format!("panel step {} must be positive", self.delta)));
        }
        if self.data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("panel has non-finite entries".into()));
        }
        Ok(())
    }

    /// Panel restricted to the marginals `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        if rows.iter().any(|&r| r >= self.d) {
            return Err(Error::Dimension("row out of range".into()));
        }
        FieldPanel::new(rows.iter().map(|&r| self.data[r].clone()).collect(), self.delta, self.seed, self.provenance)
    }
}

/// Price paths `X^i` on the grid of a measure panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePanel {
    /// `d` rows of `N + 1` values, starting at `x0`.
    pub data: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub delta: f64,
    pub seed: u64,
}

/// Mean making `E[exp(omega_i)] = 1` for marginal `i` on a grid of step
/// `delta`; `H_i = 0` marginals use the log kernel with cut-off `delta`.
pub fn marginal_mean(params: &ModelParams, i: usize, delta: f64) -> Result<f64> {
    let (h, l2) = (params.h[i][i], params.xi[i][i]);
    if h == 0.0 {
        let k = Kernel::Log { xi: l2, ell: delta, t: params.t };
        Ok(-k.value(0.0) / 2.0)
    } else {
        mu(l2, h)
    }
}

fn pair_kernel(params: &ModelParams, i: usize, j: usize, ell: f64) -> Result<Kernel> {
    Kernel::for_pair(&params.pair(i, j)?, ell)
}

fn check_for_simulation(params: &ModelParams) -> Result<()> {
    validate(params)?.into_result()?;
    let ev = params.xi_eigenvalues();
    let trace: f64 = params.lambda2_diag().iter().sum();
    if !(ev[0] > 1e-12 * trace / params.d as f64) {
        return Err(Error::Inadmissible(format!(
            "simulation needs a positive definite xi (smallest eigenvalue {})",
            ev[0]
        )));
    }
    Ok(())
}

fn kernels(params: &ModelParams, ell: f64) -> Result<Vec<Vec<Kernel>>> {
    (0..params.d)
        .map(|i| (0..params.d).map(|j| pair_kernel(params, i, j, ell)).collect())
        .collect()
}

/// Sampler for the centered field on a grid of `n` points of step `delta`.
pub fn field_sampler(params: &ModelParams, n: usize, delta: f64) -> Result<CirculantSampler> {
    check_for_simulation(params)?;
    if !(delta > 0.0) {
        return Err(domain(format!("step {delta} must be positive")));
    }
    let ks = kernels(params, delta)?;
    CirculantSampler::new(params.d, n, |i, j, k| ks[i][j].value(k as f64 * delta))
}

/// Sampler for the exact block averages of the centered field over
/// consecutive windows of length `delta` (no discretization inside a
/// block). `ell` is the log-kernel cut-off used by `H = 0` marginals.
pub fn block_average_sampler(params: &ModelParams, n: usize, delta: f64, ell: f64) -> Result<CirculantSampler> {
    check_for_simulation(params)?;
    if !(delta > 0.0 && ell > 0.0) {
        return Err(domain("block length and cut-off must be positive"));
    }
    let ks = kernels(params, ell)?;
    CirculantSampler::new(params.d, n, |i, j, k| ks[i][j].block_cov(k as f64 * delta, delta))
}

/// `n_paths` draws of the centered field at `n` points of step `delta`.
///
/// Path `p` is fully determined by `(seed, p)`.
pub fn simulate_field(
    params: &ModelParams,
    n: usize,
    delta: f64,
    seed: u64,
    n_paths: usize,
) -> Result<(Vec<FieldPanel>, EmbeddingDiagnostics)> {
    let sampler = field_sampler(params, n, delta)?;
    let panels = sampler
        .sample_many(seed, n_paths)
        .into_iter()
        .map(|data| FieldPanel { d: params.d, n, delta, data, seed, provenance: Provenance::GaussianField })
        .collect();
    Ok((panels, sampler.diagnostics().clone()))
}

/// Draws of `lambda_i Omega_i,delta / delta` sampled directly from the
/// block-average covariance: `n` blocks of length `agg * fine_delta`.
///
/// Equivalent in law to [`field_to_gaussian_proxy`] applied to a field
/// observed in continuous time.
pub fn simulate_gaussian_proxy(
    params: &ModelParams,
    n: usize,
    fine_delta: f64,
    agg: usize,
    seed: u64,
    n_paths: usize,
) -> Result<(Vec<FieldPanel>, EmbeddingDiagnostics)> {
    if agg == 0 {
        return Err(domain("agg must be at least 1"));
    }
    let delta = fine_delta * agg as f64;
    let sampler = block_average_sampler(params, n, delta, fine_delta)?;
    let panels = sampler
        .sample_many(seed, n_paths)
        .into_iter()
        .map(|data| FieldPanel {
            d: params.d,
            n,
            delta,
            data,
            seed,
            provenance: Provenance::GaussianAverageProxy,
        })
        .collect();
    Ok((panels, sampler.diagnostics().clone()))
}

fn check_agg(panel: &FieldPanel, params: &ModelParams, agg: usize) -> Result<()> {
    panel.check()?;
    if panel.d != params.d {
        return Err(Error::Dimension(format!("panel d={} but params d={}", panel.d, params.d)));
    }
    if agg == 0 || panel.n % agg != 0 {
        return Err(domain(format!("agg={agg} does not divide N={}", panel.n)));
    }
    if panel.n / agg < 2 {
        return Err(domain("aggregated panel would have fewer than 2 samples"));
    }
    Ok(())
}

/// `ln(M_i,delta'(k delta') / delta')` from a centered field panel, with
/// `delta' = agg * delta` and left-endpoint Riemann sums of
/// `exp(omega_i + mu_i)`.
pub fn field_to_measure(panel: &FieldPanel, params: &ModelParams, agg: usize) -> Result<FieldPanel> {
    check_agg(panel, params, agg)?;
    if panel.provenance != Provenance::GaussianField {
        return Err(domain(format!("expected a gaussian-field panel, got {}", panel.provenance.as_str())));
    }
    let mut data = Vec::with_capacity(panel.d);
    for (i, row) in panel.data.iter().enumerate() {
        let m = marginal_mean(params, i, panel.delta)?;
        let mut out = Vec::with_capacity(panel.n / agg);
        for (b, block) in row.chunks_exact(agg).enumerate() {
            let mut s = 0.0;
            for (k, w) in block.iter().enumerate() {
                let v = w + m;
                if v > 700.0 {
                    return Err(Error::Overflow(format!(
                        "log-field value {v} at marginal {i}, index {}",
                        b * agg + k
                    )));
                }
                s += v.exp();
            }
            out.push((s / agg as f64).ln());
        }
        data.push(out);
    }
    Ok(FieldPanel {
        d: panel.d,
        n: panel.n / agg,
        delta: panel.delta * agg as f64,
        data,
        seed: panel.seed,
        provenance: Provenance::LogvolMeasure,
    })
}

/// Block averages of the centered field: the linear, small-intermittency
/// counterpart of [`field_to_measure`].
pub fn field_to_gaussian_proxy(panel: &FieldPanel, params: &ModelParams, agg: usize) -> Result<FieldPanel> {
    check_agg(panel, params, agg)?;
    if panel.provenance != Provenance::GaussianField {
        return Err(domain(format!("expected a gaussian-field panel, got {}", panel.provenance.as_str())));
    }
    let data = panel
        .data
        .iter()
        .map(|row| row.chunks_exact(agg).map(|b| b.iter().sum::<f64>() / agg as f64).collect())
        .collect();
    Ok(FieldPanel {
        d: panel.d,
        n: panel.n / agg,
        delta: panel.delta * agg as f64,
        data,
        seed: panel.seed,
        provenance: Provenance::GaussianAverageProxy,
    })
}

fn brownian_rng(seed: u64, marginal: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PRICE_STREAM + marginal as u64);
    rng
}

/// Prices with increments `sqrt(M_i,delta') Z`, `Z` independent standard
/// normals, from a `logvol-measure` panel.
pub fn simulate_prices(measure: &FieldPanel, x0: &[f64], seed: u64) -> Result<PricePanel> {
    if measure.provenance != Provenance::LogvolMeasure {
        return Err(domain(format!("expected a logvol-measure panel, got {}", measure.provenance.as_str())));
    }
    if x0.len() != measure.d {
        return Err(Error::Dimension(format!("{} initial values for d={}", x0.len(), measure.d)));
    }
    let data = measure
        .data
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut rng = brownian_rng(seed, i);
            let mut x = x0[i];
            let mut path = Vec::with_capacity(row.len() + 1);
            path.push(x);
            for v in row {
                let var = measure.delta * v.exp();
                let z: f64 = StandardNormal.sample(&mut rng);
                x += var.sqrt() * z;
                path.push(x);
            }
            path
        })
        .collect();
    Ok(PricePanel { data, x0: x0.to_vec(), delta: measure.delta, seed })
}

/// Prices on the fine grid of a centered field panel, with increments
/// `exp((omega_i + mu_i)/2) sqrt(delta) Z`.
pub fn simulate_prices_fine(field: &FieldPanel, params: &ModelParams, x0: &[f64], seed: u64) -> Result<PricePanel> {
    if field.provenance != Provenance::GaussianField {
        return Err(domain(format!("expected a gaussian-field panel, got {}", field.provenance.as_str())));
    }
    if x0.len() != field.d || params.d != field.d {
        return Err(Error::Dimension("initial values, params and panel disagree on d".into()));
    }
    let mut data = Vec::with_capacity(field.d);
    for (i, row) in field.data.iter().enumerate() {
        let m = marginal_mean(params, i, field.delta)?;
        let mut rng = brownian_rng(seed, i);
        let mut x = x0[i];
        let mut path = Vec::with_capacity(row.len() + 1);
        path.push(x);
        for w in row {
            let z: f64 = StandardNormal.sample(&mut rng);
            x += ((w + m) / 2.0).exp() * field.delta.sqrt() * z;
            path.push(x);
        }
        data.push(path);
    }
    Ok(PricePanel { data, x0: x0.to_vec(), delta: field.delta, seed })
}

/// `ln(sum (delta X)^2 / delta')` over consecutive blocks of `agg`
/// increments, `delta' = agg * delta`.
pub fn realized_log_variance(prices: &PricePanel, agg: usize) -> Result<Vec<Vec<f64>>> {
    if agg == 0 {
        return Err(domain("agg must be at least 1"));
    }
    let span = prices.delta * agg as f64;
    prices
        .data
        .iter()
        .map(|path| {
            let incr: Vec<f64> = path.windows(2).map(|w| w[1] - w[0]).collect();
            if incr.len() % agg != 0 {
                return Err(domain(format!("agg={agg} does not divide {} increments", incr.len())));
            }
            Ok(incr.chunks_exact(agg).map(|b| (b.iter().map(|x| x * x).sum::<f64>() / span).ln()).collect())
        })
        .collect()
}
