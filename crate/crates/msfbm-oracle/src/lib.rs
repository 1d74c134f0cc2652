//! Slow, independent reference computations used only by tests.
//!
//! Nothing here shares code with `msfbm`: the quadrature works directly on
//! integrands, and the Gaussian moments enumerate pairings explicitly.

/// Gauss-Kronrod 7/15 nodes on `[-1, 1]` (non-negative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let x = h * XGK[k];
        let s = f(c - x) + f(c + x);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if depth == 0 || err <= tol.max(whole.abs() * 1e-15) || (b - a).abs() < 1e-300 {
        return v;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, whole, tol * 0.5, depth - 1) + adapt(f, m, b, whole, tol * 0.5, depth - 1)
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]` to absolute
/// tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, _) = gk15(&f, a, b);
    adapt(&f, a, b, whole, tol, 60)
}

/// [`integrate`] split at the given interior breakpoints.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts: Vec<f64> = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(b);
    let n = (pts.len() - 1) as f64;
    pts.windows(2).map(|w| integrate(&f, w[0], w[1], tol / n)).sum()
}

/// Nested adaptive double integral of `k(u - v)` over `[a, b] x [c, d]`.
///
/// The inner integral is split where `u - v` crosses each of `kinks`
/// (points where `k` is not smooth); the outer one at `c + kink` and
/// `d + kink` for each kink.
pub fn double_integral_of_difference<F: Fn(f64) -> f64>(
    k: F,
    (a, b): (f64, f64),
    (c, d): (f64, f64),
    kinks: &[f64],
    tol: f64,
) -> f64 {
    let width = (b - a).abs().max(1e-300);
    let inner = |u: f64| {
        let breaks: Vec<f64> = kinks.iter().flat_map(|&q| [u - q, u + q]).collect();
        integrate_with_breaks(|v| k(u - v), c, d, &breaks, tol / width * 0.1)
    };
    let outer: Vec<f64> = kinks.iter().flat_map(|&q| [c + q, d + q, c - q, d - q]).collect();
    integrate_with_breaks(inner, a, b, &outer, tol)
}

/// Sum over all perfect matchings, by explicit recursion: pair the first
/// remaining index with every other one.
pub fn pairing_sum(cov: &[Vec<f64>]) -> f64 {
    fn rec(cov: &[Vec<f64>], idx: &mut Vec<usize>) -> f64 {
        if idx.is_empty() {
            return 1.0;
        }
        let first = idx.remove(0);
        let mut total = 0.0;
        for k in 0..idx.len() {
            let j = idx.remove(k);
            total += cov[first][j] * rec(cov, idx);
            idx.insert(k, j);
        }
        idx.insert(0, first);
        total
    }
    let n = cov.len();
    if n % 2 == 1 {
        return 0.0;
    }
    rec(cov, &mut (0..n).collect())
}

/// Hafnian through all permutations:
/// `sum_sigma prod_k A[s(2k)][s(2k+1)] / (2^(n/2) (n/2)!)`.
pub fn hafnian_by_permutations(cov: &[Vec<f64>]) -> f64 {
    let n = cov.len();
    if n % 2 == 1 {
        return 0.0;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    // Heap's algorithm.
    let mut c = vec![0usize; n];
    let term = |p: &[usize]| (0..n / 2).map(|k| cov[p[2 * k]][p[2 * k + 1]]).product::<f64>();
    total += term(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            total += term(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let half = n / 2;
    let norm = (1u64 << half) as f64 * (1..=half as u64).product::<u64>() as f64;
    total / norm
}

/// Small deterministic generator for test inputs (SplitMix64).
#[derive(Debug, Clone)]
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Random PSD matrix `B B^T / n` with `B` uniform on `[-1, 1]`.
    pub fn psd(&mut self, n: usize) -> Vec<Vec<f64>> {
        let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| self.range(-1.0, 1.0)).collect()).collect();
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() / n as f64).collect())
            .collect()
    }
}
