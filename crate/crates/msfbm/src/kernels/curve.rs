//! Lag/value curves shared by the kernels and the estimators.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Unit of the lags of a [`CovCurve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LagUnit {
    /// Multiples of the sampling step.
    #[default]
    Steps,
    /// Absolute time.
    Time,
}

/// A sequence of `(lag, value)` pairs with a provenance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovCurve {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub unit: LagUnit,
    #[serde(default)]
    pub meta: String,
}

impl CovCurve {
    /// Checks that lags are non-negative and strictly increasing and that
    /// every value is finite.
    pub fn new(lags: Vec<f64>, values: Vec<f64>, unit: LagUnit, meta: impl Into<String>) -> Result<Self> {
        let c = CovCurve { lags, values, unit, meta: meta.into() };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<()> {
        if self.lags.is_empty() || self.lags.len() != self.values.len() {
            return Err(Error::Dimension(format!(
                "curve has {} lags and {} values",
                self.lags.len(),
                self.values.len()
            )));
        }
        if self.lags[0] < 0.0 || self.lags.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data("lags must be non-negative and strictly increasing".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("curve has non-finite values".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    /// Value at `lag`, if present.
    pub fn at(&self, lag: f64) -> Option<f64> {
        self.lags.iter().position(|&l| l == lag).map(|k| self.values[k])
    }

    /// Pointwise `self - other` on identical lags.
    pub fn sub(&self, other: &CovCurve) -> Result<CovCurve> {
        if self.lags != other.lags {
            return Err(Error::Dimension("curves have different lags".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(CovCurve {
            lags: self.lags.clone(),
            values,
            unit: self.unit,
            meta: format!("({}) - ({})", self.meta, other.meta),
        })
    }

    /// CSV with header `lag,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["lag", "value"])?;
        for (l, v) in self.lags.iter().zip(&self.values) {
            wr.write_record([fmt_f64(*l), fmt_f64(*v)])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a `lag,value` CSV.
    pub fn read_csv<R: Read>(r: R, unit: LagUnit, meta: impl Into<String>) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let (mut lags, mut values) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Data("short CSV row".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Data(e.to_string()))
            };
            lags.push(parse(0)?);
            values.push(parse(1)?);
        }
        CovCurve::new(lags, values, unit, meta)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::io::to_json_pretty(self)
    }
}
