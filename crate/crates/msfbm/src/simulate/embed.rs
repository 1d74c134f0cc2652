//! Multivariate circulant embedding.
//!
//! Each covariance sequence `c_ij(k)`, `k < N`, is wrapped symmetrically
//! onto a circle of size `M = 2^ceil(log2(2N))`. Because the sequences are
//! even, their transforms are real, and every frequency carries a real
//! symmetric `d x d` spectral matrix. Its square root (negative eigenvalues
//! clipped) colors complex white noise; one inverse transform then yields two
//! independent paths, the real and the imaginary parts.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clipped mass up to which a factorization still counts as exact.
pub const EXACT_CLIP_TOL: f64 = 1e-6;
/// Clipped mass above which the embedding is rejected.
pub const MAX_CLIP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingFlag {
    /// No negative eigenvalue.
    Exact,
    /// Clipped mass at most [`EXACT_CLIP_TOL`].
    ExactWithinTolerance,
    /// Clipped mass at most [`MAX_CLIP`].
    Approximate,
}

/// What the factorization had to discard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDiagnostics {
    /// Circulant size.
    pub m: usize,
    pub d: usize,
    /// Smallest eigenvalue over all frequencies.
    pub min_eigenvalue: f64,
    /// Number of frequencies with a negative eigenvalue.
    pub negative_frequencies: usize,
    /// Sum of clipped negative eigenvalues over the sum of absolute
    /// eigenvalues.
    pub clipped_mass: f64,
    pub flag: EmbeddingFlag,
    /// Smallest eigenvalue at each frequency `0..=M/2`.
    #[serde(skip)]
    pub per_frequency_min: Vec<f64>,
}

/// Reusable factorization of a stationary `d`-variate Gaussian sequence.
pub struct CirculantSampler {
    d: usize,
    n: usize,
    m: usize,
    /// Row-major `d x d` factor for each frequency `0..=M/2`.
    factors: Vec<f64>,
    diag: EmbeddingDiagnostics,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("d", &self.d)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("diag", &self.diag)
            .finish()
    }
}

/// Smallest power of two that is at least `2n`.
pub fn embedding_size(n: usize) -> usize {
    (2 * n.max(1)).next_power_of_two()
}

impl CirculantSampler {
    /// Factorizes the sequences `cov(i, j, k)`, `i <= j`, `k = 0..=M/2`.
    ///
    /// `cov` must be symmetric in `(i, j)`; only `i <= j` is queried.
    pub fn new<F>(d: usize, n: usize, cov: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> f64 + Sync,
    {
        if d == 0 || n < 2 {
            return Err(Error::Dimension(format!("need d >= 1 and N >= 2, got d={d}, N={n}")));
        }
        let m = embedding_size(n);
        let half = m / 2;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(m);
        // Spectra of the wrapped sequences, one per pair i <= j.
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
        let spectra: Vec<Vec<f64>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let base: Vec<f64> = (0..=half).map(|k| cov(i, j, k)).collect();
                let mut buf: Vec<Complex64> =
                    (0..m).map(|k| Complex64::new(base[k.min(m - k)], 0.0)).collect();
                fwd.process(&mut buf);
                buf[..=half].iter().map(|c| c.re).collect()
            })
            .collect();
        let pair_index = |i: usize, j: usize| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            pairs.iter().position(|&p| p == (a, b)).expect("pair present")
        };
        let idx: Vec<Vec<usize>> = (0..d).map(|i| (0..d).map(|j| pair_index(i, j)).collect()).collect();

        struct Freq {
            factor: Vec<f64>,
            min: f64,
            neg: f64,
            abs: f64,
        }
        let per_freq: Vec<Freq> = (0..=half)
            .into_par_iter()
            .map(|f| {
                let s = DMatrix::from_fn(d, d, |i, j| spectra[idx[i][j]][f]);
                let (vals, vecs) = if d == 1 {
                    (vec![s[(0, 0)]], DMatrix::from_element(1, 1, 1.0))
                } else {
                    let e = SymmetricEigen::new(s);
                    (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors)
                };
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let neg: f64 = vals.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
                let abs: f64 = vals.iter().map(|v| v.abs()).sum();
                let mut factor = vec![0.0; d * d];
                for r in 0..d {
                    for c in 0..d {
                        factor[r * d + c] = vecs[(r, c)] * vals[c].max(0.0).sqrt();
                    }
                }
                Freq { factor, min, neg, abs }
            })
            .collect();

        let weight = |f: usize| if f == 0 || f == half { 1.0 } else { 2.0 };
        let (mut neg, mut abs) = (0.0, 0.0);
        for (f, q) in per_freq.iter().enumerate() {
            neg += weight(f) * q.neg;
            abs += weight(f) * q.abs;
        }
        let clipped = if abs > 0.0 { neg / abs } else { 0.0 };
        let flag = if clipped == 0.0 {
            EmbeddingFlag::Exact
        } else if clipped <= EXACT_CLIP_TOL {
            EmbeddingFlag::ExactWithinTolerance
        } else if clipped <= MAX_CLIP {
            EmbeddingFlag::Approximate
        } else {
            return Err(Error::Embedding { clipped, limit: MAX_CLIP });
        };
        let per_frequency_min: Vec<f64> = per_freq.iter().map(|q| q.min).collect();
        let diag = EmbeddingDiagnostics {
            m,
            d,
            min_eigenvalue: per_frequency_min.iter().copied().fold(f64::INFINITY, f64::min),
            negative_frequencies: per_frequency_min.iter().filter(|v| **v < 0.0).count(),
            clipped_mass: clipped,
            flag,
            per_frequency_min,
        };
        let factors = per_freq.into_iter().flat_map(|q| q.factor).collect();
        let inv = planner.plan_fft_inverse(m);
        Ok(CirculantSampler { d, n, m, factors, diag, fft: inv })
    }

    pub fn diagnostics(&self) -> &EmbeddingDiagnostics {
        &self.diag
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Two independent `d x N` draws from one block of complex noise.
    ///
    /// The noise is a ChaCha stream keyed by `(seed, draw)`, so any draw
    /// can be regenerated on its own.
    pub fn sample_pair(&self, seed: u64, draw: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (d, m, half) = (self.d, self.m, self.m / 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(draw);
        let mut cols = vec![vec![Complex64::new(0.0, 0.0); m]; d];
        let mut z = vec![Complex64::new(0.0, 0.0); d];
        for f in 0..m {
            for zi in z.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *zi = Complex64::new(re, im);
            }
            let a = &self.factors[f.min(m - f).min(half) * d * d..][..d * d];
            for (r, col) in cols.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..d {
                    acc += z[c] * a[r * d + c];
                }
                col[f] = acc;
            }
        }
        let scale = 1.0 / (m as f64).sqrt();
        let mut re = Vec::with_capacity(d);
        let mut im = Vec::with_capacity(d);
        for mut col in cols {
            self.fft.process(&mut col);
            re.push(col[..self.n].iter().map(|c| c.re * scale).collect());
            im.push(col[..self.n].iter().map(|c| c.im * scale).collect());
        }
        (re, im)
    }

    /// Path `path` of the sequence: draw `path / 2`, real part for even
    /// paths and imaginary part for odd ones.
    pub fn sample(&self, seed: u64, path: u64) -> Vec<Vec<f64>> {
        let (re, im) = self.sample_pair(seed, path / 2);
        if path % 2 == 0 {
            re
        } else {
            im
        }
    }

    /// Paths `0..n_paths`, generated in parallel.
    pub fn sample_many(&self, seed: u64, n_paths: usize) -> Vec<Vec<Vec<f64>>> {
        let draws = n_paths.div_ceil(2) as u64;
        let mut out: Vec<Vec<Vec<f64>>> = (0..draws)
            .into_par_iter()
            .flat_map_iter(|q| {
                let (a, b) = self.sample_pair(seed, q);
                [a, b]
            })
            .collect();
        out.truncate(n_paths);
        out
    }
}
