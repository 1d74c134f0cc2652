//! Daily OHLC bars, Garman-Klass variance and aligned log-volatility
//! panels.
//!
//! Lags are counted in trading days: consecutive rows of a panel are one
//! unit apart whatever the calendar gap between them.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Value substituted for a vanishing Garman-Klass variance before taking
/// logs.
pub const DEFAULT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl OhlcBar {
    /// Checks positivity and `low <= min(open, close)`,
    /// `high >= max(open, close)`.
    pub fn check(&self) -> Result<()> {
        let p = [self.open, self.high, self.low, self.close];
        if p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Data(format!("{}: prices must be positive", self.date)));
        }
        if self.low > self.open.min(self.close) {
            return Err(Error::Data(format!("{}: low above open or close", self.date)));
        }
        if self.high < self.open.max(self.close) {
            return Err(Error::Data(format!("{}: high below open or close", self.date)));
        }
        Ok(())
    }
}

/// `1/2 ln(H/L)^2 - (2 ln 2 - 1) ln(C/O)^2`.
pub fn garman_klass(bar: &OhlcBar) -> Result<f64> {
    bar.check()?;
    let hl = (bar.high / bar.low).ln();
    let co = (bar.close / bar.open).ln();
    Ok(0.5 * hl * hl - (2.0 * std::f64::consts::LN_2 - 1.0) * co * co)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    /// 1-based line number in the file, header included.
    pub line: usize,
    pub reason: String,
}

/// What [`parse_ohlc_csv`] kept and dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub source: String,
    pub rows: usize,
    pub kept: usize,
    pub dropped: Vec<DroppedRow>,
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let day = s.split(['T', ' ']).next().unwrap_or(s);
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

/// Reads bars from a CSV whose header names `Date, Open, High, Low, Close`
/// in any case and order; other columns are ignored.
///
/// Rows that fail to parse or violate the bar invariants are dropped and
/// listed in the report. Bars come back sorted by date; a repeated date is
/// an error.
pub fn parse_ohlc_csv<R: Read>(r: R, source: &str) -> Result<(Vec<OhlcBar>, ParseReport)> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers().map_err(|e| Error::Data(format!("{source}: unreadable header: {e}")))?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Data(format!("{source}: empty file")));
    }
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Data(format!("{source}: header lacks a {name} column")))
    };
    let (cd, co, ch, cl, cc) = (col("date")?, col("open")?, col("high")?, col("low")?, col("close")?);
    let mut bars = Vec::new();
    let mut dropped = Vec::new();
    let mut rows = 0;
    for (k, rec) in rd.records().enumerate() {
        rows += 1;
        let line = k + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                dropped.push(DroppedRow { line, reason: e.to_string() });
                continue;
            }
        };
        let num = |c: usize| rec.get(c).and_then(|s| s.parse::<f64>().ok());
        let bar = match (rec.get(cd).and_then(parse_date), num(co), num(ch), num(cl), num(cc)) {
            (Some(date), Some(open), Some(high), Some(low), Some(close)) => OhlcBar { date, open, high, low, close },
            _ => {
                dropped.push(DroppedRow { line, reason: "unparseable field".into() });
                continue;
            }
        };
        if let Err(e) = bar.check() {
            dropped.push(DroppedRow { line, reason: e.to_string() });
            continue;
        }
        bars.push(bar);
    }
    if rows == 0 {
        return Err(Error::Data(format!("{source}: no data rows")));
    }
    bars.sort_by_key(|b| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::Data(format!("{source}: duplicate date {}", w[0].date)));
    }
    let kept = bars.len();
    Ok((bars, ParseReport { source: source.to_string(), rows, kept, dropped }))
}

pub fn read_ohlc_file(path: impl AsRef<Path>) -> Result<(Vec<OhlcBar>, ParseReport)> {
    let path = path.as_ref();
    parse_ohlc_csv(File::open(path)?, &path.display().to_string())
}

/// Every `*.csv` in `dir`, keyed by file stem, parsed in parallel.
pub fn read_ohlc_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<String, (Vec<OhlcBar>, ParseReport)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir.as_ref())? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            files.push((id, p));
        }
    }
    if files.is_empty() {
        return Err(Error::Data(format!("no CSV files in {}", dir.as_ref().display())));
    }
    files
        .into_par_iter()
        .map(|(id, p)| read_ohlc_file(&p).map(|r| (id, r)))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().collect())
}

/// Aligned `ln sigma^2_GK` per asset on the common dates.
///
/// `values[i][t]` belongs to asset `i` and date `t`. Masked entries were
/// imputed and are skipped by calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolPanel {
    pub assets: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<Vec<f64>>,
    pub mask: Vec<Vec<bool>>,
}

impl VolPanel {
    pub fn check(&self) -> Result<()> {
        let (d, n) = (self.assets.len(), self.dates.len());
        if self.values.len() != d || self.mask.len() != d || self.values.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("panel shape is inconsistent".into()));
        }
        if self.mask.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("mask shape is inconsistent".into()));
        }
        if self.dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data("panel dates must be strictly increasing".into()));
        }
        for (i, (row, m)) in self.values.iter().zip(&self.mask).enumerate() {
            if let Some(t) = row.iter().zip(m).position(|(v, &k)| !k && !v.is_finite()) {
                return Err(Error::Data(format!("non-finite value for {} on {}", self.assets[i], self.dates[t])));
            }
        }
        Ok(())
    }

    /// Number of masked entries.
    pub fn imputed(&self) -> usize {
        self.mask.iter().flatten().filter(|&&m| m).count()
    }

    /// CSV: `date` then one column per asset; masked cells are left empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["date".to_string()];
        head.extend(self.assets.iter().cloned());
        wr.write_record(&head)?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut rec = vec![date.format("%Y-%m-%d").to_string()];
            for i in 0..self.assets.len() {
                rec.push(if self.mask[i][t] { String::new() } else { fmt_f64(self.values[i][t]) });
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads [`VolPanel::write_csv`] output. Empty cells become masked
    /// entries holding `ln(DEFAULT_FLOOR)`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.len() < 2 || !headers[0].eq_ignore_ascii_case("date") {
            return Err(Error::Data("volatility panel needs a date column followed by asset columns".into()));
        }
        let assets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let d = assets.len();
        let (mut dates, mut values, mut mask) = (Vec::new(), vec![Vec::new(); d], vec![Vec::new(); d]);
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != d + 1 {
                return Err(Error::Data("ragged volatility panel row".into()));
            }
            dates.push(parse_date(&rec[0]).ok_or_else(|| Error::Data(format!("bad date {:?}", &rec[0])))?);
            for i in 0..d {
                let cell = &rec[i + 1];
                if cell.is_empty() {
                    values[i].push(DEFAULT_FLOOR.ln());
                    mask[i].push(true);
                } else {
                    values[i].push(cell.parse::<f64>().map_err(|e| Error::Data(format!("{cell:?}: {e}")))?);
                    mask[i].push(false);
                }
            }
        }
        let p = VolPanel { assets, dates, values, mask };
        p.check()?;
        Ok(p)
    }
}

/// Intersects the dates of all assets and takes `ln` of the Garman-Klass
/// variance.
///
/// Variances below `floor` (in practice the zero of a `High = Low` bar)
/// are replaced by `floor` and masked.
pub fn build_panel(assets: &BTreeMap<String, Vec<OhlcBar>>, min_overlap: usize, floor: f64) -> Result<VolPanel> {
    if assets.is_empty() {
        return Err(Error::Data("no assets".into()));
    }
    if !(floor > 0.0) {
        return Err(Error::Domain("floor must be positive".into()));
    }
    let mut common: Option<BTreeSet<NaiveDate>> = None;
    for bars in assets.values() {
        let s: BTreeSet<NaiveDate> = bars.iter().map(|b| b.date).collect();
        common = Some(match common {
            None => s,
            Some(c) => c.intersection(&s).copied().collect(),
        });
    }
    let dates: Vec<NaiveDate> = common.unwrap_or_default().into_iter().collect();
    if dates.len() < min_overlap.max(1) {
        return Err(Error::Data(format!("only {} common dates, need {}", dates.len(), min_overlap.max(1))));
    }
    let mut values = Vec::with_capacity(assets.len());
    let mut mask = Vec::with_capacity(assets.len());
    for (id, bars) in assets {
        let by_date: BTreeMap<NaiveDate, &OhlcBar> = bars.iter().map(|b| (b.date, b)).collect();
        let mut row = Vec::with_capacity(dates.len());
        let mut m = Vec::with_capacity(dates.len());
        for date in &dates {
            let gk = garman_klass(by_date[date]).map_err(|e| Error::Data(format!("{id}: {e}")))?;
            if gk < floor {
                row.push(floor.ln());
                m.push(true);
            } else {
                row.push(gk.ln());
                m.push(false);
            }
        }
        values.push(row);
        mask.push(m);
    }
    let p = VolPanel { assets: assets.keys().cloned().collect(), dates, values, mask };
    p.check()?;
    Ok(p)
}
