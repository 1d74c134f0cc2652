//! Text and binary encodings of [`FieldPanel`] and [`PricePanel`].
//!
//! CSV: a `#` comment line with the step, provenance and seed, then a
//! header `t,x1,...,xd` and one row per time index.
//!
//! Binary: the magic bytes `MSFB1`, a provenance byte, then `d`, `N`,
//! `delta` and `seed` as little-endian 64-bit words, then the `d x N`
//! values row-major (marginal by marginal) as little-endian `f64`.

use std::io::{BufRead, BufReader, Read, Write};

use super::{FieldPanel, PricePanel, Provenance};
use crate::error::{Error, Result};
use crate::io::fmt_f64;

pub const PANEL_MAGIC: &[u8; 5] = b"MSFB1";

fn header_line(delta: f64, provenance: &str, seed: u64, d: usize, n: usize) -> String {
    format!("# msfbm-panel delta={} provenance={provenance} seed={seed} d={d} n={n}", fmt_f64(delta))
}

fn write_rows<W: Write>(w: W, comment: &str, delta: f64, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = w;
    writeln!(w, "{comment}")?;
    let mut wr = csv::Writer::from_writer(w);
    let mut head = vec!["t".to_string()];
    head.extend((1..=rows.len()).map(|i| format!("x{i}")));
    wr.write_record(&head)?;
    let n = rows.first().map_or(0, Vec::len);
    for k in 0..n {
        let mut rec = vec![fmt_f64(k as f64 * delta)];
        rec.extend(rows.iter().map(|r| fmt_f64(r[k])));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

impl FieldPanel {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let comment = header_line(self.delta, self.provenance.as_str(), self.seed, self.d, self.n);
        write_rows(w, &comment, self.delta, &self.data)
    }

    /// Reads a panel written by [`FieldPanel::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut br = BufReader::new(r);
        let mut first = String::new();
        br.read_line(&mut first)?;
        let first = first.trim();
        let meta = first
            .strip_prefix("# msfbm-panel")
            .ok_or_else(|| Error::Data("missing '# msfbm-panel' header line".into()))?;
        let (mut delta, mut prov, mut seed) = (None, None, 0u64);
        for kv in meta.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Data(format!("bad header field {kv:?}")))?;
            match k {
                "delta" => delta = Some(v.parse::<f64>().map_err(|e| Error::Data(e.to_string()))?),
                "provenance" => prov = Some(Provenance::parse(v)?),
                "seed" => seed = v.parse().map_err(|e: std::num::ParseIntError| Error::Data(e.to_string()))?,
                _ => {}
            }
        }
        let delta = delta.ok_or_else(|| Error::Data("header lacks delta".into()))?;
        let prov = prov.ok_or_else(|| Error::Data("header lacks provenance".into()))?;
        let mut rd = csv::Reader::from_reader(br);
        let d = rd.headers()?.len().saturating_sub(1);
        let mut data = vec![Vec::new(); d];
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != d + 1 {
                return Err(Error::Data("ragged panel row".into()));
            }
            for (i, row) in data.iter_mut().enumerate() {
                row.push(rec[i + 1].trim().parse::<f64>().map_err(|e| Error::Data(e.to_string()))?);
            }
        }
        FieldPanel::new(data, delta, seed, prov)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(PANEL_MAGIC)?;
        w.write_all(&[self.provenance.code()])?;
        w.write_all(&(self.d as u64).to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.delta.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for row in &self.data {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != PANEL_MAGIC {
            return Err(Error::Data("not an MSFB1 panel".into()));
        }
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let prov = Provenance::from_code(b1[0])?;
        let mut b8 = [0u8; 8];
        let mut word = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b8)?;
            Ok(b8)
        };
        let d = u64::from_le_bytes(word(&mut r)?) as usize;
        let n = u64::from_le_bytes(word(&mut r)?) as usize;
        let delta = f64::from_le_bytes(word(&mut r)?);
        let seed = u64::from_le_bytes(word(&mut r)?);
        match d.checked_mul(n) {
            Some(c) if c <= 1 << 34 => {}
            _ => return Err(Error::Data(format!("implausible panel size {d} x {n}"))),
        }
        let mut data = vec![vec![0.0; n]; d];
        for row in data.iter_mut() {
            for v in row.iter_mut() {
                *v = f64::from_le_bytes(word(&mut r)?);
            }
        }
        FieldPanel::new(data, delta, seed, prov)
    }
}

impl PricePanel {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.data.first().map_or(0, Vec::len);
        let comment = header_line(self.delta, "price", self.seed, self.data.len(), n);
        write_rows(w, &comment, self.delta, &self.data)
    }
}
