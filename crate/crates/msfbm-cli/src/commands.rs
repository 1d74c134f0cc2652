//! The five subcommands. Each takes a resolved configuration and an output
//! directory and returns the exit status of a run that got far enough to
//! write its outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use msfbm::error::Error;
use msfbm::estimate::{calibrate_panel, mc_validate, McConfig, PanelCalibration};
use msfbm::io::{fmt_f64, write_json};
use msfbm::kernels::{
    c_h, index_ratio_bound, index_variance_decomposition, integrated_cov, logvol_incr_corr, mrm_cross_cov_series,
    mrm_cross_cov_sia, phi_tilde, CovCurve, Kernel, KernelArgs, LagUnit,
};
use msfbm::marketdata::{build_panel, read_ohlc_dir, VolPanel};
use msfbm::model::{validate, PairParams};
use msfbm::simulate::{
    field_sampler, field_to_gaussian_proxy, field_to_measure, simulate_gaussian_proxy, simulate_prices, FieldPanel, Provenance,
    PANEL_MAGIC,
};
use serde::Serialize;

use crate::config::*;
use crate::CliError;

/// Share of pairs that must converge for `calibrate` to exit 0.
pub const MIN_CONVERGED: f64 = 0.8;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::from(Error::from(e))
}

/// SplitMix64 finalizer, used to give every path its own price seed.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn write_panel(panel: &FieldPanel, dir: &Path, stem: &str, format: Format) -> Result<(), CliError> {
    let path = dir.join(format!("{stem}.{}", format.ext()));
    match format {
        Format::Csv => panel.write_csv(create(&path)?)?,
        Format::Binary => panel.write_binary(create(&path)?)?,
        Format::Json => write_json(&path, panel)?,
    }
    Ok(())
}

pub fn cmd_simulate(cfg: &mut SimulateConfig, out: &Path) -> Result<i32, CliError> {
    let params = resolve_params(&cfg.params_file, &mut cfg.params)?;
    validate(&params)?.into_result()?;
    if cfg.paths == 0 {
        return Err(CliError::config("paths must be at least 1"));
    }
    if cfg.agg == 0 || cfg.n % cfg.agg != 0 || cfg.n / cfg.agg < 2 {
        return Err(CliError::config(format!("agg={} must divide N={} into at least 2 blocks", cfg.agg, cfg.n)));
    }
    let x0 = cfg.x0.get_or_insert_with(|| vec![0.0; params.d]).clone();
    if x0.len() != params.d {
        return Err(CliError::config(format!("{} initial prices for d={}", x0.len(), params.d)));
    }
    cfg.outputs.sort();
    cfg.outputs.dedup();
    if cfg.outputs.is_empty() {
        return Err(CliError::config("outputs is empty"));
    }
    if cfg.format == Format::Binary && cfg.outputs.contains(&SimOutput::Prices) {
        return Err(CliError::config("price panels have no binary encoding; use csv or json"));
    }
    let width = (cfg.paths - 1).to_string().len();
    let mut diagnostics = BTreeMap::new();
    if cfg.outputs.contains(&SimOutput::BlockProxy) {
        let (panels, diag) = simulate_gaussian_proxy(&params, cfg.n / cfg.agg, cfg.delta, cfg.agg, cfg.seed, cfg.paths)?;
        for (p, panel) in panels.iter().enumerate() {
            write_panel(panel, out, &format!("block_proxy_{p:0width$}"), cfg.format)?;
        }
        diagnostics.insert("block_proxy", diag);
    }
    if cfg.outputs.iter().all(|o| *o == SimOutput::BlockProxy) {
        write_json(out.join("diagnostics.json"), &diagnostics)?;
        return Ok(0);
    }
    let sampler = field_sampler(&params, cfg.n, cfg.delta)?;
    diagnostics.insert("field", sampler.diagnostics().clone());
    write_json(out.join("diagnostics.json"), &diagnostics)?;
    for p in 0..cfg.paths {
        let field = FieldPanel::new(sampler.sample(cfg.seed, p as u64), cfg.delta, cfg.seed, Provenance::GaussianField)?;
        let tag = format!("{p:0width$}");
        for what in &cfg.outputs {
            match what {
                SimOutput::Field => write_panel(&field, out, &format!("field_{tag}"), cfg.format)?,
                SimOutput::Proxy => {
                    let g = field_to_gaussian_proxy(&field, &params, cfg.agg)?;
                    write_panel(&g, out, &format!("proxy_{tag}"), cfg.format)?;
                }
                SimOutput::Measure | SimOutput::Prices | SimOutput::BlockProxy => {}
            }
        }
        let wants_measure = cfg.outputs.contains(&SimOutput::Measure);
        let wants_prices = cfg.outputs.contains(&SimOutput::Prices);
        if wants_measure || wants_prices {
            let m = field_to_measure(&field, &params, cfg.agg)?;
            if wants_measure {
                write_panel(&m, out, &format!("measure_{tag}"), cfg.format)?;
            }
            if wants_prices {
                let prices = simulate_prices(&m, &x0, mix(cfg.seed ^ mix(p as u64)))?;
                let path = out.join(format!("prices_{tag}.{}", cfg.format.ext()));
                match cfg.format {
                    Format::Json => write_json(&path, &prices)?,
                    _ => prices.write_csv(create(&path)?)?,
                }
            }
        }
    }
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct CovRow {
    pub lag: f64,
    pub value: Option<f64>,
    pub in_domain: bool,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
struct CovFile<'a> {
    kernel: &'static str,
    pair: &'a PairParams,
    delta: f64,
    /// In-domain rows only.
    curve: Option<CovCurve>,
    rows: &'a [CovRow],
}

fn cov_value(kind: CovKind, tau: f64, delta: f64, pair: &PairParams, terms: usize) -> Result<(f64, String), Error> {
    Ok(match kind {
        CovKind::Field => (Kernel::for_pair(pair, delta)?.value(tau), String::new()),
        CovKind::Integrated => (integrated_cov(&KernelArgs { tau, delta, pair: *pair })?, String::new()),
        CovKind::PhiTilde => (phi_tilde(tau, delta, pair)?, String::new()),
        CovKind::IncrCorr => (logvol_incr_corr(tau, delta, pair)?, String::new()),
        CovKind::MrmSeries => {
            let s = mrm_cross_cov_series(tau, delta, pair, terms)?;
            let note = if s.converged {
                String::new()
            } else {
                format!("series stopped after {} terms at relative term size {:.3e}", s.terms, s.achieved_tol)
            };
            (s.value, note)
        }
        CovKind::MrmSia => (mrm_cross_cov_sia(tau, delta, pair)?, String::new()),
    })
}

fn cov_meta(kind: CovKind, i: usize, j: usize, pair: &PairParams, delta: f64) -> String {
    let what = match kind {
        CovKind::Field => "field cross-covariance C_ij(tau)",
        CovKind::Integrated => "block-integrated covariance over [0,delta]x[tau,tau+delta] divided by lambda_i lambda_j",
        CovKind::PhiTilde => "increment structure function phi~(tau, delta)",
        CovKind::IncrCorr => "small-intermittency correlation of log-volatility increments",
        CovKind::MrmSeries => "E[M_i,delta(t) M_j,delta(t+tau)], series",
        CovKind::MrmSia => "E[M_i,delta(t) M_j,delta(t+tau)], small-intermittency approximation",
    };
    format!(
        "{what}; i={i} j={j} g={} H_ij={} H_i={} H_j={} lambda_i2={} lambda_j2={} T={} delta={}",
        pair.g, pair.h_ij, pair.h_i, pair.h_j, pair.lambda_i2, pair.lambda_j2, pair.t, delta
    )
}

/// Evaluates every requested curve row by row; rows outside the domain of
/// a formula are flagged and skipped.
pub fn covariance_rows(cfg: &CovarianceConfig, pair: &PairParams, kind: CovKind) -> Vec<CovRow> {
    let lags = cfg.lags.clone().unwrap_or_default();
    lags.iter()
        .map(|&lag| match cov_value(kind, lag, cfg.delta, pair, cfg.series_terms) {
            Ok((v, note)) => CovRow { lag, value: Some(v), in_domain: true, note },
            Err(e) => CovRow { lag, value: None, in_domain: false, note: e.to_string() },
        })
        .collect()
}

pub fn cmd_covariance(cfg: &mut CovarianceConfig, out: &Path) -> Result<i32, CliError> {
    let params = resolve_params(&cfg.params_file, &mut cfg.params)?;
    validate(&params)?.into_result()?;
    let j = *cfg.j.get_or_insert(if params.d > 1 { 1 } else { 0 });
    let pair = params.pair(cfg.i, j)?;
    if !(cfg.delta > 0.0) {
        return Err(CliError::config("delta must be positive"));
    }
    if cfg.format == Format::Binary {
        return Err(CliError::config("curves are written as csv or json"));
    }
    let delta = cfg.delta;
    let lags = cfg.lags.get_or_insert_with(|| (0..=64).map(|k| k as f64 * delta).collect());
    if lags.iter().any(|l| !l.is_finite() || *l < 0.0) || lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config("lags must be finite, non-negative and strictly increasing"));
    }
    cfg.kernels.sort();
    cfg.kernels.dedup();
    for &kind in &cfg.kernels {
        let rows = covariance_rows(cfg, &pair, kind);
        let path = out.join(format!("{}.{}", kind.name(), cfg.format.ext()));
        match cfg.format {
            Format::Json => {
                let ok: Vec<&CovRow> = rows.iter().filter(|r| r.value.is_some()).collect();
                let curve = (!ok.is_empty())
                    .then(|| {
                        CovCurve::new(
                            ok.iter().map(|r| r.lag).collect(),
                            ok.iter().map(|r| r.value.unwrap_or(f64::NAN)).collect(),
                            LagUnit::Time,
                            cov_meta(kind, cfg.i, j, &pair, cfg.delta),
                        )
                    })
                    .transpose()?;
                write_json(&path, &CovFile { kernel: kind.name(), pair: &pair, delta: cfg.delta, curve, rows: &rows })?;
            }
            _ => {
                let mut w = csv_writer(&path)?;
                w.write_record(["lag", "value", "in_domain", "note"]).map_err(csv_err)?;
                for r in &rows {
                    let v = r.value.map(fmt_f64).unwrap_or_default();
                    w.write_record([fmt_f64(r.lag), v, r.in_domain.to_string(), r.note.clone()]).map_err(csv_err)?;
                }
                w.flush().map_err(|e| CliError::from(Error::from(e)))?;
            }
        }
    }
    Ok(0)
}

/// A panel read for calibration.
struct LoadedPanel {
    assets: Vec<String>,
    rows: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<bool>>>,
    delta: f64,
}

fn load_panel(cfg: &CalibrateConfig, out: &Path) -> Result<LoadedPanel, CliError> {
    match (&cfg.panel, &cfg.ohlc_dir) {
        (Some(_), Some(_)) => Err(CliError::config("give either panel or ohlc_dir, not both")),
        (None, None) => Err(CliError::config("no input: give panel or ohlc_dir")),
        (None, Some(dir)) => {
            let files = read_ohlc_dir(dir)?;
            let reports: BTreeMap<&String, _> = files.iter().map(|(k, (_, r))| (k, r)).collect();
            write_json(out.join("parse_reports.json"), &reports)?;
            let bars = files.iter().map(|(k, (b, _))| (k.clone(), b.clone())).collect();
            let vp = build_panel(&bars, cfg.min_overlap, cfg.floor)?;
            vp.write_csv(create(&out.join("panel.csv"))?)?;
            Ok(LoadedPanel { assets: vp.assets, rows: vp.values, masks: Some(vp.mask), delta: cfg.delta.unwrap_or(1.0) })
        }
        (Some(path), None) => {
            let mut bytes = Vec::new();
            File::open(path)
                .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
                .map_err(|e| CliError::config(format!("cannot read panel {}: {e}", path.display())))?;
            if bytes.is_empty() {
                return Err(CliError::config(format!("panel {} is empty", path.display())));
            }
            let field = if bytes.starts_with(PANEL_MAGIC) {
                Some(FieldPanel::read_binary(bytes.as_slice())?)
            } else if bytes.starts_with(b"# msfbm-panel") {
                Some(FieldPanel::read_csv(bytes.as_slice())?)
            } else {
                None
            };
            match field {
                Some(f) => Ok(LoadedPanel {
                    assets: (1..=f.d).map(|i| format!("x{i}")).collect(),
                    rows: f.data,
                    masks: None,
                    delta: cfg.delta.unwrap_or(f.delta),
                }),
                None => {
                    let vp = VolPanel::read_csv(bytes.as_slice())?;
                    Ok(LoadedPanel {
                        assets: vp.assets,
                        rows: vp.values,
                        masks: Some(vp.mask),
                        delta: cfg.delta.unwrap_or(1.0),
                    })
                }
            }
        }
    }
}

/// What `calibrate` writes to `calibration.json`.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub assets: Vec<String>,
    pub converged_fraction: f64,
    pub calibration: PanelCalibration,
}

pub fn cmd_calibrate(cfg: &mut CalibrateConfig, out: &Path) -> Result<(i32, CalibrationReport), CliError> {
    let panel = load_panel(cfg, out)?;
    if panel.rows.is_empty() || panel.rows[0].is_empty() {
        return Err(CliError::config("panel is empty"));
    }
    if !(panel.delta > 0.0) {
        return Err(CliError::config("delta must be positive"));
    }
    cfg.delta = Some(panel.delta);
    let n = panel.rows[0].len();
    let t = *cfg.t.get_or_insert(n as f64 * panel.delta);
    let opts = cfg.fit.options();
    if opts.grid.max_lag() >= n {
        return Err(CliError::config(format!(
            "panel has N={n} observations but the lag grid reaches {}; lower q",
            opts.grid.max_lag()
        )));
    }
    let cal = calibrate_panel(&panel.rows, panel.masks.as_deref(), panel.delta, t, &opts)?;
    let report = CalibrationReport { assets: panel.assets, converged_fraction: cal.converged_fraction(), calibration: cal };
    write_calibration(&report, out)?;
    let code = if report.converged_fraction < MIN_CONVERGED { 4 } else { 0 };
    Ok((code, report))
}

fn write_calibration(r: &CalibrationReport, out: &Path) -> Result<(), CliError> {
    let cal = &r.calibration;
    let a = &r.assets;
    write_json(out.join("calibration.json"), r)?;
    if let Ok(p) = cal.params() {
        write_json(out.join("estimate.json"), &p)?;
    }
    let opt = |v: f64| if v.is_finite() { fmt_f64(v) } else { String::new() };

    let mut w = csv_writer(&out.join("marginals.csv"))?;
    w.write_record(["asset", "H", "lambda2", "converged", "error"]).map_err(csv_err)?;
    for (i, m) in cal.marginals.iter().enumerate() {
        w.write_record([
            a[i].clone(),
            opt(cal.h[i][i]),
            opt(cal.xi[i][i]),
            m.converged().to_string(),
            m.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::from(Error::from(e)))?;
    if cal.d < 2 {
        return Ok(());
    }

    let mut pairs = csv_writer(&out.join("pairs.csv"))?;
    pairs
        .write_record(["asset_i", "asset_j", "H_ij", "g_ij", "xi_ij", "objective", "converged", "error"])
        .map_err(csv_err)?;
    let mut hurst = csv_writer(&out.join("scatter_hurst.csv"))?;
    hurst.write_record(["asset_i", "asset_j", "H_i", "H_j", "H_ij"]).map_err(csv_err)?;
    let mut inter = csv_writer(&out.join("scatter_intermittency.csv"))?;
    inter.write_record(["asset_i", "asset_j", "lambda2_i", "lambda2_j", "xi_ij"]).map_err(csv_err)?;
    let mut corr = csv_writer(&out.join("scatter_g.csv"))?;
    corr.write_record(["asset_i", "asset_j", "g_ij"]).map_err(csv_err)?;
    for p in &cal.pairs {
        let (i, j) = (p.i, p.j);
        let (ai, aj) = (a[i].clone(), a[j].clone());
        let objective = p.fit.result.as_ref().map(|r| fmt_f64(r.objective)).unwrap_or_default();
        pairs
            .write_record([
                ai.clone(),
                aj.clone(),
                opt(cal.h[i][j]),
                opt(cal.g[i][j]),
                opt(cal.xi[i][j]),
                objective,
                p.fit.converged().to_string(),
                p.fit.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        if p.fit.result.is_none() {
            continue;
        }
        hurst
            .write_record([ai.clone(), aj.clone(), opt(cal.h[i][i]), opt(cal.h[j][j]), opt(cal.h[i][j])])
            .map_err(csv_err)?;
        inter
            .write_record([ai.clone(), aj.clone(), opt(cal.xi[i][i]), opt(cal.xi[j][j]), opt(cal.xi[i][j])])
            .map_err(csv_err)?;
        corr.write_record([ai, aj, opt(cal.g[i][j])]).map_err(csv_err)?;
    }
    for w in [&mut pairs, &mut hurst, &mut inter, &mut corr] {
        w.flush().map_err(|e| CliError::from(Error::from(e)))?;
    }
    Ok(())
}

pub fn cmd_mc_validate(cfg: &mut McValidateConfig, out: &Path) -> Result<i32, CliError> {
    let params = resolve_params(&cfg.params_file, &mut cfg.params)?;
    let mc = McConfig {
        params,
        n_list: cfg.n_list.clone(),
        replicas: cfg.replicas,
        seed: cfg.seed,
        proxy: cfg.proxy,
        fine_delta: cfg.fine_delta,
        agg: cfg.agg,
        options: cfg.fit.options(),
    };
    let report = mc_validate(&mc)?;
    write_json(out.join("report.json"), &report)?;
    let mut w = csv_writer(&out.join("summary.csv"))?;
    w.write_record(["n", "parameter", "truth", "mean", "std", "replicas", "succeeded"]).map_err(csv_err)?;
    for s in &report.sizes {
        s.write_replica_csv(create(&out.join(format!("replicas_N{}.csv", s.n)))?)?;
        for (k, truth) in &s.truth {
            w.write_record([
                s.n.to_string(),
                k.clone(),
                fmt_f64(*truth),
                fmt_f64(s.mean[k]),
                s.std[k].map(fmt_f64).unwrap_or_default(),
                s.replicas.to_string(),
                s.succeeded.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::from(Error::from(e)))?;
    if !report.slopes.is_empty() {
        let mut w = csv_writer(&out.join("slopes.csv"))?;
        w.write_record(["parameter", "slope"]).map_err(csv_err)?;
        for (k, b) in &report.slopes {
            w.write_record([k.clone(), fmt_f64(*b)]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::from(Error::from(e)))?;
    }
    Ok(0)
}

/// One row of `index.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    pub tau: f64,
    pub delta: f64,
    /// Variance with its cross-asset and own-asset parts.
    pub variance: Result<(f64, f64, f64), String>,
    /// Finite and limit forms of the ratio bound, for homogeneous models.
    pub bound: Option<Result<(f64, f64), String>>,
}

/// `(H, H')` when all co-Hurst exponents agree and all marginal ones
/// agree.
fn homogeneous_hurst(p: &msfbm::model::ModelParams) -> Option<(f64, f64)> {
    let d = p.d;
    if d < 2 {
        return None;
    }
    let hp = p.h[0][0];
    let h = p.h[0][1];
    let same = (0..d).all(|i| (0..d).all(|j| if i == j { p.h[i][j] == hp } else { p.h[i][j] == h }));
    same.then_some((h, hp))
}

pub fn index_rows(cfg: &AnalyzeIndexConfig, params: &msfbm::model::ModelParams) -> Vec<IndexRow> {
    let w = cfg.weights.clone().unwrap_or_default();
    let hom = homogeneous_hurst(params);
    let mut rows = Vec::new();
    for &tau in &cfg.taus {
        for &delta in &cfg.deltas {
            let variance = index_variance_decomposition(&w, params, tau, delta)
                .map(|v| (v.total, v.cross, v.own))
                .map_err(|e| e.to_string());
            let bound = hom.map(|(h, hp)| {
                index_ratio_bound(h, hp, delta, tau, params.t, params.d)
                    .map(|b| (b.finite, b.limit))
                    .map_err(|e| e.to_string())
            });
            rows.push(IndexRow { tau, delta, variance, bound });
        }
    }
    rows
}

pub fn cmd_analyze_index(cfg: &mut AnalyzeIndexConfig, out: &Path) -> Result<i32, CliError> {
    if cfg.params_file.is_none() && cfg.params.is_none() {
        if let Some(h) = cfg.homogeneous {
            cfg.params = Some(h.params());
        }
    }
    let params = resolve_params(&cfg.params_file, &mut cfg.params)?;
    validate(&params)?.into_result()?;
    let w = cfg.weights.get_or_insert_with(|| vec![1.0 / params.d as f64; params.d]);
    if w.len() != params.d {
        return Err(CliError::config(format!("{} weights for d={}", w.len(), params.d)));
    }
    let rows = index_rows(cfg, &params);
    let hom = homogeneous_hurst(&params);
    let ch = hom.map(|(h, _)| fmt_f64(c_h(h))).unwrap_or_default();
    let mut wr = csv_writer(&out.join("index.csv"))?;
    wr.write_record([
        "tau",
        "delta",
        "variance",
        "cross",
        "own",
        "cross_over_own",
        "ratio_bound",
        "ratio_bound_limit",
        "c_h",
        "in_domain",
        "note",
    ])
    .map_err(csv_err)?;
    for r in &rows {
        let mut rec = vec![fmt_f64(r.tau), fmt_f64(r.delta)];
        let mut notes = Vec::new();
        match &r.variance {
            Ok((t, c, o)) => {
                rec.extend([fmt_f64(*t), fmt_f64(*c), fmt_f64(*o)]);
                rec.push(if *o != 0.0 { fmt_f64(c / o) } else { String::new() });
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 4));
                notes.push(e.clone());
            }
        }
        match &r.bound {
            Some(Ok((f, l))) => rec.extend([fmt_f64(*f), fmt_f64(*l)]),
            Some(Err(e)) => {
                rec.extend([String::new(), String::new()]);
                notes.push(e.clone());
            }
            None => rec.extend([String::new(), String::new()]),
        }
        rec.push(ch.clone());
        rec.push(notes.is_empty().to_string());
        rec.push(notes.join("; "));
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush().map_err(|e| CliError::from(Error::from(e)))?;
    Ok(0)
}
