//! Monte-Carlo validation: simulate, calibrate, summarize.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::io::fmt_f64;
use crate::model::{validate, ModelParams};
use crate::simulate::{block_average_sampler, field_sampler, field_to_measure, FieldPanel, Provenance};

use super::gmm::{calibrate_pair, calibrate_univariate, CalibrationOptions, Marginal, TSpec};

/// What the calibrated series are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyMode {
    /// Exact block averages of the Gaussian field.
    #[default]
    Gaussian,
    /// `ln(M_delta / delta)` of the exponential measure on the fine grid.
    Measure,
}

impl ProxyMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ProxyMode::Gaussian),
            "measure" => Ok(ProxyMode::Measure),
            _ => Err(domain(format!("unknown proxy mode {s:?} (gaussian|measure)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub params: ModelParams,
    /// Numbers of aggregated observations.
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub proxy: ProxyMode,
    /// Step of the fine grid.
    pub fine_delta: f64,
    /// Fine steps per observation.
    pub agg: usize,
    pub options: CalibrationOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaFailure {
    pub replica: usize,
    pub error: String,
}

/// Estimates over the replicas of one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSize {
    pub n: usize,
    pub seed: u64,
    pub replicas: usize,
    pub succeeded: usize,
    /// Replicas in which some fit did not meet the convergence criterion.
    pub not_converged: usize,
    pub failures: Vec<ReplicaFailure>,
    pub truth: BTreeMap<String, f64>,
    /// Per parameter, one estimate per successful replica in replica order.
    pub samples: BTreeMap<String, Vec<f64>>,
    pub replica_ids: Vec<usize>,
    pub mean: BTreeMap<String, f64>,
    /// Sample standard deviation; `None` with fewer than two replicas.
    pub std: BTreeMap<String, Option<f64>>,
    pub std_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: McConfig,
    pub sizes: Vec<McSize>,
    /// Slope of `ln std` against `ln N` per parameter, with three or more
    /// sizes.
    pub slopes: BTreeMap<String, f64>,
}

fn label(i: usize, j: usize, d: usize) -> String {
    if d < 10 {
        format!("{}{}", i + 1, j + 1)
    } else {
        format!("{}_{}", i + 1, j + 1)
    }
}

/// Parameter names and true values, in report order.
pub fn true_values(params: &ModelParams) -> BTreeMap<String, f64> {
    let d = params.d;
    let mut out = BTreeMap::new();
    for i in 0..d {
        out.insert(format!("H_{}", i + 1), params.h[i][i]);
        out.insert(format!("lambda2_{}", i + 1), params.xi[i][i]);
    }
    for i in 0..d {
        for j in i + 1..d {
            let l = label(i, j, d);
            out.insert(format!("H_{l}"), params.h[i][j]);
            out.insert(format!("g_{l}"), params.xi[i][j] / (params.xi[i][i] * params.xi[j][j]).sqrt());
        }
    }
    out
}

/// Calibrates every marginal and pair of one panel. The `bool` is false
/// when some fit hit the iteration cap.
pub fn calibrate_all(
    rows: &[Vec<f64>],
    delta: f64,
    t: f64,
    opts: &CalibrationOptions,
) -> Result<(BTreeMap<String, f64>, bool)> {
    let d = rows.len();
    let mut out = BTreeMap::new();
    let mut margins = Vec::with_capacity(d);
    let mut converged = true;
    for (i, x) in rows.iter().enumerate() {
        let r = calibrate_univariate(x, delta, TSpec::Fixed(t), opts)?;
        converged &= r.converged;
        out.insert(format!("H_{}", i + 1), r.get("H"));
        out.insert(format!("lambda2_{}", i + 1), r.get("lambda2"));
        margins.push(Marginal::from_result(&r));
    }
    for i in 0..d {
        for j in i + 1..d {
            let r = calibrate_pair(&rows[i], &rows[j], margins[i], margins[j], delta, t, opts)?;
            converged &= r.converged;
            let l = label(i, j, d);
            out.insert(format!("H_{l}"), r.get("H_ij"));
            out.insert(format!("g_{l}"), r.get("g"));
        }
    }
    Ok((out, converged))
}

fn mean_std(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, None);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, Some(var.sqrt()))
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn run_size(cfg: &McConfig, n: usize, seed: u64) -> Result<McSize> {
    let p = &cfg.params;
    let delta = cfg.fine_delta * cfg.agg as f64;
    let sampler = match cfg.proxy {
        ProxyMode::Gaussian => block_average_sampler(p, n, delta, cfg.fine_delta)?,
        ProxyMode::Measure => field_sampler(p, n * cfg.agg, cfg.fine_delta)?,
    };
    let draws = cfg.replicas.div_ceil(2);
    let results: Vec<(usize, Result<(BTreeMap<String, f64>, bool)>)> = (0..draws)
        .into_par_iter()
        .flat_map_iter(|q| {
            let (a, b) = sampler.sample_pair(seed, q as u64);
            let reps = [(2 * q, a), (2 * q + 1, b)];
            reps.into_iter()
                .filter(|(r, _)| *r < cfg.replicas)
                .map(|(r, data)| {
                    let rows = match cfg.proxy {
                        ProxyMode::Gaussian => Ok(data),
                        ProxyMode::Measure => FieldPanel::new(data, cfg.fine_delta, seed, Provenance::GaussianField)
                            .and_then(|f| field_to_measure(&f, p, cfg.agg))
                            .map(|m| m.data),
                    };
                    (r, rows.and_then(|rows| calibrate_all(&rows, delta, p.t, &cfg.options)))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let truth = true_values(p);
    let mut samples: BTreeMap<String, Vec<f64>> = truth.keys().map(|k| (k.clone(), Vec::new())).collect();
    let mut failures = Vec::new();
    let mut replica_ids = Vec::new();
    let mut not_converged = 0;
    for (r, res) in results {
        match res {
            Ok((est, conv)) => {
                replica_ids.push(r);
                not_converged += usize::from(!conv);
                for (k, v) in est {
                    samples.entry(k).or_default().push(v);
                }
            }
            Err(e) => failures.push(ReplicaFailure { replica: r, error: e.to_string() }),
        }
    }
    if failures.len() * 5 > cfg.replicas {
        return Err(Error::Calibration(format!(
            "{} of {} replicas failed at N={n}; first: {}",
            failures.len(),
            cfg.replicas,
            failures[0].error
        )));
    }
    let succeeded = replica_ids.len();
    let mut mean = BTreeMap::new();
    let mut std = BTreeMap::new();
    for (k, v) in &samples {
        let (m, s) = mean_std(v);
        mean.insert(k.clone(), m);
        std.insert(k.clone(), s);
    }
    Ok(McSize {
        n,
        seed,
        replicas: cfg.replicas,
        succeeded,
        not_converged,
        failures,
        truth,
        samples,
        replica_ids,
        mean,
        std,
        std_undefined: succeeded < 2,
    })
}

/// Runs the experiment for every `N` in the list, size `k` with seed
/// `seed + k`.
///
/// More than 20% failed replicas at any size is an error.
pub fn mc_validate(cfg: &McConfig) -> Result<McReport> {
    if !validate(&cfg.params)?.is_admissible() {
        return Err(Error::Inadmissible(validate(&cfg.params)?.to_string()));
    }
    if cfg.replicas == 0 || cfg.n_list.is_empty() || cfg.agg == 0 || !(cfg.fine_delta > 0.0) {
        return Err(domain("need replicas >= 1, a non-empty N list, agg >= 1 and a positive step"));
    }
    let sizes = cfg
        .n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| run_size(cfg, n, cfg.seed.wrapping_add(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut slopes = BTreeMap::new();
    if sizes.len() >= 3 {
        for k in sizes[0].truth.keys() {
            let pts: Vec<(f64, f64)> = sizes
                .iter()
                .filter_map(|s| s.std.get(k).copied().flatten().filter(|v| *v > 0.0).map(|v| ((s.n as f64).ln(), v.ln())))
                .collect();
            if pts.len() >= 3 {
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                if let Some(b) = ols_slope(&x, &y) {
                    slopes.insert(k.clone(), b);
                }
            }
        }
    }
    Ok(McReport { config: cfg.clone(), sizes, slopes })
}

impl McSize {
    /// CSV with columns `replica,parameter,value`.
    pub fn write_replica_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["replica", "parameter", "value"])?;
        for (pos, r) in self.replica_ids.iter().enumerate() {
            for (k, v) in &self.samples {
                wr.write_record([r.to_string(), k.clone(), fmt_f64(v[pos])])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}
