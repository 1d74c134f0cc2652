//! Resolved run configurations.
//!
//! Every subcommand reads an optional JSON file into one of these structs,
//! applies command-line flags on top, and echoes the result. Missing keys
//! take the defaults below; unknown keys are rejected.

use std::path::{Path, PathBuf};

use msfbm::estimate::{CalibrationOptions, LagGrid, MomentKind, ProxyMode};
use msfbm::model::ModelParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Encoding of panel and curve files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Binary,
}

impl Format {
    pub fn ext(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Binary => "bin",
        }
    }
}

/// Panels written by `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimOutput {
    /// Centered field on the fine grid.
    Field,
    /// `ln(M / delta')` at the aggregated step.
    Measure,
    /// Block averages of the centered field at the aggregated step.
    Proxy,
    /// Continuous-time block averages sampled directly from their
    /// covariance, independently of the field paths.
    BlockProxy,
    /// Prices driven by the aggregated measure.
    Prices,
}

/// Curves written by `covariance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovKind {
    /// Field cross-covariance `C_ij(tau)`.
    Field,
    /// Block-integrated covariance, normalized by `lambda_i lambda_j`.
    Integrated,
    /// Increment structure function `phi~`.
    PhiTilde,
    /// Small-intermittency correlation of log-volatility increments.
    IncrCorr,
    /// Measure cross moment, series form.
    MrmSeries,
    /// Measure cross moment, small-intermittency form.
    MrmSia,
}

impl CovKind {
    pub const ALL: [CovKind; 6] =
        [CovKind::Field, CovKind::Integrated, CovKind::PhiTilde, CovKind::IncrCorr, CovKind::MrmSeries, CovKind::MrmSia];

    pub fn name(&self) -> &'static str {
        match self {
            CovKind::Field => "field",
            CovKind::Integrated => "integrated",
            CovKind::PhiTilde => "phi-tilde",
            CovKind::IncrCorr => "incr-corr",
            CovKind::MrmSeries => "mrm-series",
            CovKind::MrmSia => "mrm-sia",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Read before `params`, and wins over it.
    pub params_file: Option<PathBuf>,
    pub params: Option<ModelParams>,
    /// Fine-grid points per path.
    pub n: usize,
    /// Fine-grid step.
    pub delta: f64,
    pub seed: u64,
    pub paths: usize,
    /// Fine steps per aggregated observation.
    pub agg: usize,
    pub outputs: Vec<SimOutput>,
    pub format: Format,
    /// Initial prices; zeros when absent.
    pub x0: Option<Vec<f64>>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            params_file: None,
            params: None,
            n: 1024,
            delta: 1.0,
            seed: 0,
            paths: 1,
            agg: 16,
            outputs: vec![SimOutput::Field, SimOutput::Measure, SimOutput::Prices],
            format: Format::Csv,
            x0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovarianceConfig {
    pub params_file: Option<PathBuf>,
    pub params: Option<ModelParams>,
    /// Marginals of the pair, 0-based; `j` defaults to 1 (0 when `d = 1`).
    pub i: usize,
    pub j: Option<usize>,
    /// Lags in time units; `0, delta, ..., 64 delta` when absent.
    pub lags: Option<Vec<f64>>,
    /// Aggregation scale of the integrated curves and cut-off of log
    /// kernels.
    pub delta: f64,
    pub kernels: Vec<CovKind>,
    pub series_terms: usize,
    pub format: Format,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        CovarianceConfig {
            params_file: None,
            params: None,
            i: 0,
            j: None,
            lags: None,
            delta: 1.0,
            kernels: CovKind::ALL.to_vec(),
            series_terms: msfbm::kernels::SERIES_MAX_TERMS,
            format: Format::Csv,
        }
    }
}

/// Options shared by `calibrate` and `mc-validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Largest exponent of the square-root lag grid.
    pub q: usize,
    pub moments: MomentKind,
    /// HAC bandwidth; `floor(N^(1/3))` when absent.
    pub bandwidth: Option<usize>,
    pub two_step: bool,
    pub max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        let o = CalibrationOptions::default();
        FitConfig { q: o.grid.q, moments: o.moments, bandwidth: o.bandwidth, two_step: o.two_step, max_iter: o.max_iter }
    }
}

impl FitConfig {
    pub fn options(&self) -> CalibrationOptions {
        CalibrationOptions {
            grid: LagGrid::sqrt_two(self.q),
            moments: self.moments,
            bandwidth: self.bandwidth,
            two_step: self.two_step,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    /// Volatility panel CSV, or a simulated panel (CSV or binary).
    pub panel: Option<PathBuf>,
    /// Directory of per-asset OHLC CSVs, used instead of `panel`.
    pub ohlc_dir: Option<PathBuf>,
    /// Sampling step; from the panel header, or 1 for dated panels.
    pub delta: Option<f64>,
    /// Correlation scale; `N delta` when absent.
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Common dates required when building a panel from OHLC files.
    pub min_overlap: usize,
    /// Garman-Klass floor for zero-range bars.
    pub floor: f64,
    pub fit: FitConfig,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        CalibrateConfig {
            panel: None,
            ohlc_dir: None,
            delta: None,
            t: None,
            min_overlap: 2,
            floor: msfbm::marketdata::DEFAULT_FLOOR,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McValidateConfig {
    pub params_file: Option<PathBuf>,
    pub params: Option<ModelParams>,
    /// Numbers of aggregated observations.
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub proxy: ProxyMode,
    pub fine_delta: f64,
    pub agg: usize,
    pub fit: FitConfig,
}

impl Default for McValidateConfig {
    fn default() -> Self {
        McValidateConfig {
            params_file: None,
            params: None,
            n_list: vec![1024],
            replicas: 50,
            seed: 0,
            proxy: ProxyMode::Gaussian,
            fine_delta: 1.0,
            agg: 16,
            fit: FitConfig::default(),
        }
    }
}

/// Generates the homogeneous model `H_ii = h_prime`, `H_ij = h`,
/// `lambda_i^2 = lambda2`, `xi_ij = g lambda2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Homogeneous {
    pub d: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub h: f64,
    pub h_prime: f64,
    pub lambda2: f64,
    pub g: f64,
}

impl Homogeneous {
    pub fn params(&self) -> ModelParams {
        ModelParams::homogeneous(self.d, self.t, self.h_prime, self.h, self.lambda2, self.g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeIndexConfig {
    pub params_file: Option<PathBuf>,
    pub params: Option<ModelParams>,
    /// Used when neither `params_file` nor `params` is given.
    pub homogeneous: Option<Homogeneous>,
    /// Index weights; equal weights `1/d` when absent.
    pub weights: Option<Vec<f64>>,
    pub taus: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl Default for AnalyzeIndexConfig {
    fn default() -> Self {
        AnalyzeIndexConfig {
            params_file: None,
            params: None,
            homogeneous: None,
            weights: None,
            taus: vec![5.0, 25.0, 125.0],
            deltas: vec![1.0],
        }
    }
}

/// Reads `path` into `T`, or returns the defaults.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let s = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&s).map_err(|e| CliError::config(format!("config {}: {e}", p.display())))
        }
    }
}

/// Fills `params` from `params_file` when given, and checks that some
/// parameters are present.
pub fn resolve_params(file: &Option<PathBuf>, params: &mut Option<ModelParams>) -> Result<ModelParams, CliError> {
    if let Some(f) = file {
        let s = std::fs::read_to_string(f)
            .map_err(|e| CliError::config(format!("cannot read params file {}: {e}", f.display())))?;
        *params = Some(ModelParams::from_json(&s)?);
    }
    params.clone().ok_or_else(|| CliError::config("no model parameters: give params_file or params"))
}
