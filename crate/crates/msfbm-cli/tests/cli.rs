use std::fs;
use std::path::Path;
use std::process::Command;

use msfbm::error::Error;
use msfbm_cli::config::SimulateConfig;
use msfbm_cli::{run, CliError};

const PARAMS: &str = r#"{"d":2,"T":256,"H":[[0.1,0.15],[0.15,0.2]],"xi":[[0.05,0.025],[0.025,0.05]]}"#;

fn msfbm(args: &[&str]) -> i32 {
    run(std::iter::once("msfbm").chain(args.iter().copied()))
}

fn params_file(dir: &Path) -> String {
    let p = dir.join("p.json");
    fs::write(&p, PARAMS).unwrap();
    p.to_str().unwrap().to_string()
}

/// Every file of `dir` except the run log, by name.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "run.log")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn usage_and_help_statuses() {
    assert_eq!(msfbm(&["bogus"]), 2);
    assert_eq!(msfbm(&["simulate", "--n", "many"]), 2);
    assert_eq!(msfbm(&["--help"]), 0);
    assert_eq!(msfbm(&["--version"]), 0);
}

#[test]
fn error_kinds_map_to_statuses() {
    let code = |e: Error| CliError::from(e).code;
    assert_eq!(code(Error::Inadmissible("x".into())), 2);
    assert_eq!(code(Error::Domain("x".into())), 2);
    assert_eq!(code(Error::Data("x".into())), 2);
    assert_eq!(code(Error::Embedding { clipped: 1.0, limit: 1e-3 }), 3);
    assert_eq!(code(Error::Overflow("x".into())), 3);
    assert_eq!(code(Error::Calibration("x".into())), 4);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(msfbm(&["simulate", "--out", out]), 2);
    assert_eq!(msfbm(&["simulate", "--out", out, "--params-file", "/nonexistent/p.json"]), 2);
    let p = params_file(dir.path());
    assert_eq!(msfbm(&["simulate", "--out", out, "--params-file", &p, "--n", "1024", "--agg", "7"]), 2);
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"n": 64, "colour": "red"}"#).unwrap();
    assert_eq!(msfbm(&["simulate", "--out", out, "--config", cfg.to_str().unwrap()]), 2);
    fs::write(&cfg, r#"{"params": {"d":1,"T":10,"H":[[0.6]],"xi":[[0.05]]}}"#).unwrap();
    assert_eq!(msfbm(&["simulate", "--out", out, "--config", cfg.to_str().unwrap()]), 2);
    let log = fs::read_to_string(Path::new(out).join("run.log")).unwrap();
    assert!(log.contains("exit=2"), "{log}");
}

#[test]
fn simulate_is_byte_identical_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let p = params_file(dir.path());
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let args = ["simulate", "--out", out.to_str().unwrap(), "--params-file", &p, "--n", "512", "--paths", "2"];
        assert_eq!(msfbm(&[&args[..], &["--outputs", "field,measure,proxy,prices", "--seed", "9"]].concat()), 0);
        runs.push(outputs(&out));
    }
    assert_eq!(runs[0], runs[1]);
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    for f in ["config.resolved.json", "diagnostics.json", "field_0.csv", "measure_1.csv", "prices_0.csv", "proxy_1.csv"] {
        assert!(names.contains(&f), "{names:?}");
    }

    let out = dir.path().join("c");
    let args = ["simulate", "--out", out.to_str().unwrap(), "--params-file", &p, "--n", "512", "--seed", "10"];
    assert_eq!(msfbm(&args), 0);
    assert_ne!(fs::read(out.join("field_0.csv")).unwrap(), runs[0][2].1);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = params_file(dir.path());
    let a = dir.path().join("a");
    let args = ["simulate", "--out", a.to_str().unwrap(), "--params-file", &p, "--n", "256", "--agg", "8"];
    assert_eq!(msfbm(&[&args[..], &["--format", "binary", "--outputs", "field,proxy"]].concat()), 0);
    let resolved = a.join("config.resolved.json");
    let cfg: SimulateConfig = serde_json::from_str(&fs::read_to_string(&resolved).unwrap()).unwrap();
    assert_eq!((cfg.n, cfg.agg, cfg.delta), (256, 8, 1.0));
    assert_eq!(cfg.x0, Some(vec![0.0, 0.0]));
    assert_eq!(cfg.params.as_ref().unwrap().h[0][1], 0.15);

    let b = dir.path().join("b");
    assert_eq!(msfbm(&["simulate", "--out", b.to_str().unwrap(), "--config", resolved.to_str().unwrap()]), 0);
    assert_eq!(outputs(&a), outputs(&b));
    assert!(fs::read(a.join("field_0.bin")).unwrap().starts_with(b"MSFB1"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, format!(r#"{{"params": {PARAMS}, "n": 128, "seed": 3, "outputs": ["field"]}}"#)).unwrap();
    let out = dir.path().join("o");
    assert_eq!(msfbm(&["simulate", "--out", out.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--n", "64", "--agg", "4"]), 0);
    let got: SimulateConfig = serde_json::from_str(&fs::read_to_string(out.join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!((got.n, got.seed, got.agg), (64, 3, 4));
}

#[test]
fn covariance_flags_rows_outside_the_domain() {
    let dir = tempfile::tempdir().unwrap();
    let p = params_file(dir.path());
    let out = dir.path().join("o");
    let args = ["covariance", "--out", out.to_str().unwrap(), "--params-file", &p, "--lags", "0,4,300"];
    assert_eq!(msfbm(&args), 0);
    let series = fs::read_to_string(out.join("mrm-series.csv")).unwrap();
    let rows: Vec<&str> = series.lines().collect();
    assert_eq!(rows[0], "lag,value,in_domain,note");
    assert!(rows[1].contains(",,false,"), "{series}");
    assert!(rows[2].contains(",true,"), "{series}");
    assert!(rows[3].contains(",,false,"), "{series}");
    let field = fs::read_to_string(out.join("field.csv")).unwrap();
    assert!(field.lines().nth(3).unwrap().starts_with("3.0000000000000000e2,0.0000000000000000e0,true"), "{field}");

    let json = dir.path().join("j");
    let args = ["covariance", "--out", json.to_str().unwrap(), "--params-file", &p, "--format", "json", "--kernels", "integrated"];
    assert_eq!(msfbm(&args), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(json.join("integrated.json")).unwrap()).unwrap();
    assert!(v["curve"]["meta"].as_str().unwrap().contains("H_ij=0.15"));
    assert_eq!(v["rows"].as_array().unwrap().len(), 65);
}

fn write_panel(path: &Path, rows: &[Vec<f64>]) {
    let mut s = String::from("date");
    for i in 0..rows.len() {
        s.push_str(&format!(",a{i}"));
    }
    s.push('\n');
    for l in 0..rows[0].len() {
        s.push_str(&chrono_like_date(l));
        for r in rows {
            s.push_str(&format!(",{}", r[l]));
        }
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

/// Distinct increasing ISO dates on a 28-day, 12-month calendar.
fn chrono_like_date(l: usize) -> String {
    let (y, rest) = (2000 + l / 336, l % 336);
    format!("{y:04}-{:02}-{:02}", rest / 28 + 1, rest % 28 + 1)
}

fn simulated_rows(d: usize, n: usize) -> Vec<Vec<f64>> {
    let p = msfbm::model::ModelParams::homogeneous(d, 1024.0, 0.1, 0.15, 0.05, 0.5);
    msfbm::simulate::simulate_gaussian_proxy(&p, n, 1.0, 8, 5, 1).unwrap().0.remove(0).data
}

#[test]
fn calibrate_single_asset_and_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let rows = simulated_rows(2, 2048);

    let one = dir.path().join("one.csv");
    write_panel(&one, &rows[..1]);
    let out = dir.path().join("o1");
    assert_eq!(msfbm(&["calibrate", "--out", out.to_str().unwrap(), "--panel", one.to_str().unwrap(), "--q", "12"]), 0);
    assert!(out.join("marginals.csv").exists());
    assert!(!out.join("pairs.csv").exists());

    let two = dir.path().join("two.csv");
    write_panel(&two, &rows);
    let mut runs = Vec::new();
    for name in ["o2", "o3"] {
        let out = dir.path().join(name);
        let args = ["calibrate", "--out", out.to_str().unwrap(), "--panel", two.to_str().unwrap(), "--q", "12", "--T", "1024"];
        assert_eq!(msfbm(&args), 0);
        runs.push(outputs(&out));
    }
    assert_eq!(runs[0], runs[1]);
    let pairs = fs::read_to_string(dir.path().join("o2/pairs.csv")).unwrap();
    assert!(pairs.starts_with("asset_i,asset_j,H_ij,g_ij"), "{pairs}");
    assert!(pairs.lines().nth(1).unwrap().starts_with("a0,a1,"));
    for f in ["scatter_hurst.csv", "scatter_intermittency.csv", "scatter_g.csv", "estimate.json", "calibration.json"] {
        assert!(dir.path().join("o2").join(f).exists(), "{f}");
    }
}

#[test]
fn calibrate_rejects_empty_and_conflicting_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(msfbm(&["calibrate", "--out", out, "--panel", empty.to_str().unwrap()]), 2);
    let header = dir.path().join("header.csv");
    fs::write(&header, "date,a,b\n").unwrap();
    assert_eq!(msfbm(&["calibrate", "--out", out, "--panel", header.to_str().unwrap()]), 2);
    assert_eq!(msfbm(&["calibrate", "--out", out]), 2);
    let d = dir.path().to_str().unwrap();
    assert_eq!(msfbm(&["calibrate", "--out", out, "--panel", header.to_str().unwrap(), "--ohlc-dir", d]), 2);
}

#[test]
fn calibrate_exits_4_when_pairs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = simulated_rows(2, 1024);
    rows[1] = vec![-3.0; 1024];
    let panel = dir.path().join("p.csv");
    write_panel(&panel, &rows);
    let out = dir.path().join("o");
    assert_eq!(msfbm(&["calibrate", "--out", out.to_str().unwrap(), "--panel", panel.to_str().unwrap(), "--q", "10"]), 4);
    let pairs = fs::read_to_string(out.join("pairs.csv")).unwrap();
    assert!(pairs.lines().nth(1).unwrap().contains(",false,"), "{pairs}");
}

#[test]
fn calibrate_from_ohlc_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ohlc");
    fs::create_dir(&data).unwrap();
    let rows = simulated_rows(2, 600);
    for (i, r) in rows.iter().enumerate() {
        let mut s = String::from("Date,Open,High,Low,Close\n");
        for (l, v) in r.iter().enumerate() {
            // A bar whose Garman-Klass value is exp(v).
            let range = (2.0 * v.exp()).sqrt();
            s.push_str(&format!("{},100,{},100,100\n", chrono_like_date(l), 100.0 * range.exp()));
        }
        fs::write(data.join(format!("S{i}.csv")), s).unwrap();
    }
    let out = dir.path().join("o");
    let args = ["calibrate", "--out", out.to_str().unwrap(), "--ohlc-dir", data.to_str().unwrap(), "--q", "10"];
    assert_eq!(msfbm(&args), 0);
    assert!(fs::read_to_string(out.join("panel.csv")).unwrap().starts_with("date,S0,S1\n"));
    assert!(out.join("parse_reports.json").exists());
    assert!(fs::read_to_string(out.join("pairs.csv")).unwrap().contains("S0,S1,"));
}

#[test]
fn mc_validate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let p = params_file(dir.path());
    let out = dir.path().join("o");
    let args = ["mc-validate", "--out", out.to_str().unwrap(), "--params-file", &p, "--n-list", "128,256,512"];
    assert_eq!(msfbm(&[&args[..], &["--replicas", "3", "--q", "10", "--agg", "4"]].concat()), 0);
    for f in ["report.json", "summary.csv", "slopes.csv", "replicas_N128.csv", "replicas_N512.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let reps = fs::read_to_string(out.join("replicas_N256.csv")).unwrap();
    assert!(reps.starts_with("replica,parameter,value\n"));
}

#[test]
fn analyze_index_from_a_homogeneous_block() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"homogeneous": {"d": 5, "T": 1000, "h": 0.12, "h_prime": 0.02, "lambda2": 0.05, "g": 1.0}}"#)
        .unwrap();
    let out = dir.path().join("o");
    let args = ["analyze-index", "--out", out.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--taus", "5,50"];
    assert_eq!(msfbm(&args), 0);
    let csv = fs::read_to_string(out.join("index.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("tau,delta,variance,cross,own"));
    assert!(lines[1].ends_with(",true,"), "{csv}");
    let resolved = fs::read_to_string(out.join("config.resolved.json")).unwrap();
    assert!(resolved.contains("\"weights\""), "{resolved}");
}

#[test]
fn workers_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let p = params_file(dir.path());
    let out = dir.path().join("o");
    let status = Command::new(env!("CARGO_BIN_EXE_msfbm"))
        .args(["simulate", "--out", out.to_str().unwrap(), "--params-file", &p, "--n", "128", "--agg", "4"])
        .env("MSFBM_WORKERS", "3")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let log = fs::read_to_string(out.join("run.log")).unwrap();
    assert!(log.contains("workers=3"), "{log}");

    let status = Command::new(env!("CARGO_BIN_EXE_msfbm"))
        .args(["simulate", "--out", out.to_str().unwrap(), "--params-file", &p, "--agg", "7"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
