use std::collections::BTreeMap;

use chrono::NaiveDate;
use msfbm::marketdata::*;
use msfbm_oracle::SplitMix;
use proptest::prelude::*;

fn day(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

fn bar(date: &str, open: f64, high: f64, low: f64, close: f64) -> OhlcBar {
    OhlcBar { date: day(date), open, high, low, close }
}

#[test]
fn gk_degenerate_bar_is_zero() {
    assert_eq!(garman_klass(&bar("2020-01-02", 50.0, 50.0, 50.0, 50.0)).unwrap(), 0.0);
}

#[test]
fn gk_hand_examples() {
    // Open = Close: only the range term survives.
    let a = garman_klass(&bar("2020-01-02", 100.0, 110.0, 90.0, 100.0)).unwrap();
    let want_a = 0.5 * (11.0f64 / 9.0).ln().powi(2);
    assert!((a - want_a).abs() < 1e-9);
    assert!((a - 0.020135).abs() < 1e-6);

    // ln(H/L) = ln(C/O) = ln 1.05.
    let b = garman_klass(&bar("2020-01-02", 100.0, 105.0, 100.0, 105.0)).unwrap();
    let l = 1.05f64.ln();
    let want_b = (0.5 - (2.0 * std::f64::consts::LN_2 - 1.0)) * l * l;
    assert!((b - want_b).abs() < 1e-9);
    assert!((b - 2.707e-4).abs() < 1e-7);
}

#[test]
fn gk_rejects_bad_prices() {
    assert!(garman_klass(&bar("2020-01-02", 0.0, 1.0, 0.5, 1.0)).is_err());
    assert!(garman_klass(&bar("2020-01-02", 1.0, 1.0, -0.5, 1.0)).is_err());
    assert!(garman_klass(&bar("2020-01-02", 1.0, 1.1, 0.9, f64::NAN)).is_err());
}

fn random_bar(rng: &mut SplitMix) -> OhlcBar {
    let open = rng.range(1.0, 1000.0);
    let close = open * rng.range(-0.2, 0.2).exp();
    let high = open.max(close) * rng.range(0.0, 0.1).exp();
    let low = open.min(close) * (-rng.range(0.0, 0.1)).exp();
    OhlcBar { date: day("2021-06-01"), open, high, low, close }
}

#[test]
fn gk_nonnegative_on_random_bars() {
    let mut rng = SplitMix(11);
    for _ in 0..100_000 {
        let b = random_bar(&mut rng);
        assert!(garman_klass(&b).unwrap() >= 0.0, "{b:?}");
    }
}

#[test]
fn gk_scale_invariant_on_random_bars() {
    let mut rng = SplitMix(12);
    for _ in 0..100_000 {
        let b = random_bar(&mut rng);
        let c = rng.range(1e-3, 1e3);
        let s = OhlcBar { open: b.open * c, high: b.high * c, low: b.low * c, close: b.close * c, ..b };
        let (v, w) = (garman_klass(&b).unwrap(), garman_klass(&s).unwrap());
        assert!((v - w).abs() <= 1e-14, "{v} vs {w}");
    }
}

proptest! {
    #[test]
    fn gk_zero_only_for_flat_range(open in 1.0f64..100.0, up in 0.0f64..0.05, down in 0.0f64..0.05, t in 0.0f64..1.0) {
        let high = open * (1.0 + up);
        let low = open * (1.0 - down);
        let close = low + t * (high - low);
        let v = garman_klass(&OhlcBar { date: day("2021-01-04"), open, high, low, close }).unwrap();
        prop_assert!(v >= 0.0);
        if high > low {
            prop_assert!(v > 0.0);
        }
    }
}

#[test]
fn parse_sorts_rows() {
    let csv = "Date,Open,High,Low,Close\n2020-01-03,10,11,9,10.5\n2020-01-01,10,11,9,10\n2020-01-02,10,12,9,11\n";
    let (bars, rep) = parse_ohlc_csv(csv.as_bytes(), "a").unwrap();
    assert_eq!(bars.len(), 3);
    assert!(bars.windows(2).all(|w| w[0].date < w[1].date));
    assert_eq!(bars[0].date, day("2020-01-01"));
    assert_eq!((rep.rows, rep.kept), (3, 3));
    assert!(rep.dropped.is_empty());
}

#[test]
fn parse_drops_invalid_bars() {
    let csv = "Date,Open,High,Low,Close\n2020-01-01,10,11,9,10\n2020-01-02,10,10.5,9,11\n2020-01-03,x,11,9,10\n";
    let (bars, rep) = parse_ohlc_csv(csv.as_bytes(), "a").unwrap();
    assert_eq!(bars.len(), 1);
    assert_eq!(rep.kept, 1);
    assert_eq!(rep.dropped.len(), 2);
    assert_eq!(rep.dropped[0].line, 3);
    assert!(rep.dropped[0].reason.contains("high"));
}

#[test]
fn parse_rejects_duplicate_dates() {
    let csv = "Date,Open,High,Low,Close\n2020-01-01,10,11,9,10\n2020-01-01,10,11,9,10\n";
    let e = parse_ohlc_csv(csv.as_bytes(), "a").unwrap_err().to_string();
    assert!(e.contains("2020-01-01"), "{e}");
}

#[test]
fn parse_header_is_case_insensitive_and_ignores_extras() {
    let csv = "volume,CLOSE,low,High,open,DATE\n5,10,9,11,10,2020-01-01\n";
    let (bars, _) = parse_ohlc_csv(csv.as_bytes(), "a").unwrap();
    assert_eq!(bars, vec![bar("2020-01-01", 10.0, 11.0, 9.0, 10.0)]);
}

#[test]
fn parse_errors() {
    assert!(parse_ohlc_csv("".as_bytes(), "a").is_err());
    assert!(parse_ohlc_csv("Date,Open,High,Low,Close\n".as_bytes(), "a").is_err());
    let e = parse_ohlc_csv("Date,Open,High,Close\n2020-01-01,1,1,1\n".as_bytes(), "a").unwrap_err().to_string();
    assert!(e.contains("low"), "{e}");
}

fn flat_bars(dates: &[&str]) -> Vec<OhlcBar> {
    dates.iter().map(|d| bar(d, 100.0, 101.0, 99.0, 100.5)).collect()
}

#[test]
fn panel_on_identical_dates() {
    let dates = ["2020-01-01", "2020-01-02", "2020-01-03"];
    let assets = BTreeMap::from([("a".to_string(), flat_bars(&dates)), ("b".to_string(), flat_bars(&dates))]);
    let p = build_panel(&assets, 1, DEFAULT_FLOOR).unwrap();
    assert_eq!(p.assets, vec!["a", "b"]);
    assert_eq!(p.dates.len(), 3);
    assert_eq!(p.imputed(), 0);
    let want = garman_klass(&assets["a"][0]).unwrap().ln();
    assert!(p.values.iter().flatten().all(|v| (v - want).abs() < 1e-15));
}

#[test]
fn panel_drops_dates_missing_anywhere() {
    let assets = BTreeMap::from([
        ("a".to_string(), flat_bars(&["2020-01-01", "2020-01-02", "2020-01-03"])),
        ("b".to_string(), flat_bars(&["2020-01-01", "2020-01-03", "2020-01-06"])),
    ]);
    let p = build_panel(&assets, 1, DEFAULT_FLOOR).unwrap();
    assert_eq!(p.dates, vec![day("2020-01-01"), day("2020-01-03")]);
    for bars in assets.values() {
        assert!(p.dates.iter().all(|d| bars.iter().any(|b| b.date == *d)));
    }
    assert_eq!(p.values.len(), 2);
    assert!(build_panel(&assets, 3, DEFAULT_FLOOR).is_err());
}

#[test]
fn panel_masks_zero_range_bars() {
    let mut a = flat_bars(&["2020-01-01", "2020-01-02"]);
    a[1] = bar("2020-01-02", 100.0, 100.0, 100.0, 100.0);
    let assets = BTreeMap::from([("a".to_string(), a)]);
    let p = build_panel(&assets, 1, DEFAULT_FLOOR).unwrap();
    assert_eq!(p.mask[0], vec![false, true]);
    assert_eq!(p.values[0][1], DEFAULT_FLOOR.ln());
    assert_eq!(p.imputed(), 1);
}

#[test]
fn panel_errors() {
    assert!(build_panel(&BTreeMap::new(), 1, DEFAULT_FLOOR).is_err());
    let assets = BTreeMap::from([("a".to_string(), flat_bars(&["2020-01-01"]))]);
    assert!(build_panel(&assets, 1, 0.0).is_err());
}

#[test]
fn panel_csv_round_trip() {
    let mut a = flat_bars(&["2020-01-01", "2020-01-02", "2020-01-03"]);
    a[2] = bar("2020-01-03", 7.0, 7.0, 7.0, 7.0);
    let b: Vec<OhlcBar> = a.iter().map(|x| OhlcBar { high: x.high * 1.01, ..*x }).collect();
    let assets = BTreeMap::from([("x".to_string(), a), ("y".to_string(), b)]);
    let p = build_panel(&assets, 1, DEFAULT_FLOOR).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("date,x,y\n"));
    let q = VolPanel::read_csv(buf.as_slice()).unwrap();
    assert_eq!(p, q);
}

#[test]
fn read_dir_keys_by_stem() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("AAA.csv"), "Date,Open,High,Low,Close\n2020-01-01,10,11,9,10\n").unwrap();
    std::fs::write(dir.path().join("BBB.CSV"), "Date,Open,High,Low,Close\n2020-01-01,10,11,9,10\n").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
    let m = read_ohlc_dir(dir.path()).unwrap();
    assert_eq!(m.keys().collect::<Vec<_>>(), vec!["AAA", "BBB"]);
}
