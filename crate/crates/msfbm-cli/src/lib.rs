//! Front end of the `msfbm` binary.
//!
//! Exit statuses: 0 success, 2 configuration or validation error, 3
//! simulation or embedding failure, 4 calibration degradation.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use msfbm::error::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub mod commands;
pub mod config;

use config::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{msg}")]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { code: 2, msg: msg.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Embedding { .. } | Error::Overflow(_) => 3,
            Error::Calibration(_) => 4,
            _ => 2,
        };
        CliError { code, msg: e.to_string() }
    }
}

fn serde_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "msfbm", version, about = "Simulate and calibrate multivariate log S-fBM volatility models")]
pub struct Cli {
    /// Worker threads; all cores when absent.
    #[arg(long, env = "MSFBM_WORKERS", global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created when missing.
    #[arg(long, default_value = "msfbm-out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate field, measure, proxy and price panels.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params_file: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        agg: Option<usize>,
        /// Any of field, measure, proxy, block-proxy, prices.
        #[arg(long, value_delimiter = ',', value_parser = serde_enum::<SimOutput>)]
        outputs: Option<Vec<SimOutput>>,
        /// csv, json or binary.
        #[arg(long, value_parser = serde_enum::<Format>)]
        format: Option<Format>,
    },
    /// Evaluate covariance curves of one pair.
    Covariance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params_file: Option<PathBuf>,
        #[arg(long)]
        i: Option<usize>,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        lags: Option<Vec<f64>>,
        #[arg(long)]
        delta: Option<f64>,
        /// Any of field, integrated, phi-tilde, incr-corr, mrm-series, mrm-sia.
        #[arg(long, value_delimiter = ',', value_parser = serde_enum::<CovKind>)]
        kernels: Option<Vec<CovKind>>,
        #[arg(long, value_parser = serde_enum::<Format>)]
        format: Option<Format>,
    },
    /// Calibrate a panel of log-volatility proxies.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long)]
        ohlc_dir: Option<PathBuf>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long)]
        q: Option<usize>,
        /// increment, level or level-finite-sample.
        #[arg(long, value_parser = serde_enum::<msfbm::estimate::MomentKind>)]
        moments: Option<msfbm::estimate::MomentKind>,
        #[arg(long)]
        min_overlap: Option<usize>,
    },
    /// Monte-Carlo check of the estimator on simulated panels.
    McValidate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params_file: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// gaussian or measure.
        #[arg(long, value_parser = serde_enum::<msfbm::estimate::ProxyMode>)]
        proxy: Option<msfbm::estimate::ProxyMode>,
        #[arg(long)]
        agg: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
    },
    /// Variance of an index of log-volatilities and its cross-asset share.
    AnalyzeIndex {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params_file: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

/// Loads the configuration, applies the flags, runs the command and writes
/// the resolved configuration beside the outputs.
fn execute<C, F>(common: &Common, flags: impl FnOnce(&mut C), body: F) -> Result<i32, CliError>
where
    C: DeserializeOwned + Default + Serialize,
    F: FnOnce(&mut C, &Path) -> Result<i32, CliError>,
{
    let mut cfg: C = load(common.config.as_deref())?;
    flags(&mut cfg);
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", common.out.display())))?;
    let res = body(&mut cfg, &common.out);
    msfbm::io::write_json(common.out.join("config.resolved.json"), &cfg)?;
    res
}

fn dispatch(command: Command) -> (Option<PathBuf>, Result<i32, CliError>) {
    match command {
        Command::Simulate { common, params_file, n, delta, seed, paths, agg, outputs, format } => {
            let r = execute(
                &common,
                |c: &mut SimulateConfig| {
                    set_opt(&mut c.params_file, params_file);
                    set(&mut c.n, n);
                    set(&mut c.delta, delta);
                    set(&mut c.seed, seed);
                    set(&mut c.paths, paths);
                    set(&mut c.agg, agg);
                    set(&mut c.outputs, outputs);
                    set(&mut c.format, format);
                },
                commands::cmd_simulate,
            );
            (Some(common.out), r)
        }
        Command::Covariance { common, params_file, i, j, lags, delta, kernels, format } => {
            let r = execute(
                &common,
                |c: &mut CovarianceConfig| {
                    set_opt(&mut c.params_file, params_file);
                    set(&mut c.i, i);
                    set_opt(&mut c.j, j);
                    set_opt(&mut c.lags, lags);
                    set(&mut c.delta, delta);
                    set(&mut c.kernels, kernels);
                    set(&mut c.format, format);
                },
                commands::cmd_covariance,
            );
            (Some(common.out), r)
        }
        Command::Calibrate { common, panel, ohlc_dir, delta, t, q, moments, min_overlap } => {
            let r = execute(
                &common,
                |c: &mut CalibrateConfig| {
                    set_opt(&mut c.panel, panel);
                    set_opt(&mut c.ohlc_dir, ohlc_dir);
                    set_opt(&mut c.delta, delta);
                    set_opt(&mut c.t, t);
                    set(&mut c.fit.q, q);
                    set(&mut c.fit.moments, moments);
                    set(&mut c.min_overlap, min_overlap);
                },
                |c, out| commands::cmd_calibrate(c, out).map(|(code, _)| code),
            );
            (Some(common.out), r)
        }
        Command::McValidate { common, params_file, n_list, replicas, seed, proxy, agg, q } => {
            let r = execute(
                &common,
                |c: &mut McValidateConfig| {
                    set_opt(&mut c.params_file, params_file);
                    set(&mut c.n_list, n_list);
                    set(&mut c.replicas, replicas);
                    set(&mut c.seed, seed);
                    set(&mut c.proxy, proxy);
                    set(&mut c.agg, agg);
                    set(&mut c.fit.q, q);
                },
                commands::cmd_mc_validate,
            );
            (Some(common.out), r)
        }
        Command::AnalyzeIndex { common, params_file, weights, taus, deltas } => {
            let r = execute(
                &common,
                |c: &mut AnalyzeIndexConfig| {
                    set_opt(&mut c.params_file, params_file);
                    set_opt(&mut c.weights, weights);
                    set(&mut c.taus, taus);
                    set(&mut c.deltas, deltas);
                },
                commands::cmd_analyze_index,
            );
            (Some(common.out), r)
        }
    }
}

fn write_run_log(dir: &Path, argv: &[String], workers: usize, code: i32, elapsed: f64, err: Option<&str>) {
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut s = format!(
        "finished_unix={unix}\nelapsed_s={elapsed:.3}\nworkers={workers}\nexit={code}\nargv={}\n",
        argv.join(" ")
    );
    if let Some(e) = err {
        s.push_str(&format!("error={e}\n"));
    }
    let _ = std::fs::write(dir.join("run.log"), s);
}

/// Runs the command line `args` (program name first) and returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if cli.workers == Some(0) {
        eprintln!("error: workers must be at least 1");
        return 2;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    let workers = pool.current_num_threads();
    let start = Instant::now();
    let (out, res) = pool.install(|| dispatch(cli.command));
    let elapsed = start.elapsed().as_secs_f64();
    let (code, err) = match res {
        Ok(c) => (c, None),
        Err(e) => {
            eprintln!("error: {}", e.msg);
            (e.code, Some(e.msg))
        }
    };
    if let Some(dir) = out.filter(|d| d.is_dir()) {
        write_run_log(&dir, &argv, workers, code, elapsed, err.as_deref());
    }
    code
}
