//! Parameter containers and admissibility checks.
//!
//! A [`ModelParams`] holds the correlation scale `T`, the co-Hurst matrix
//! `H` and the co-intermittency matrix `xi`. The marginal Hurst exponents and
//! intermittencies are the diagonals of those matrices, so they can never
//! disagree with them.
//!
//! ```
//! use msfbm::model::{ModelParams, validate};
//!
//! let p = ModelParams::new(
//!     16384.0,
//!     vec![vec![0.02, 0.15], vec![0.15, 0.02]],
//!     vec![vec![0.05, 0.025], vec![0.025, 0.05]],
//! )
//! .unwrap();
//! assert!(validate(&p).unwrap().is_admissible());
//! assert!((p.g_matrix().unwrap()[0][1] - 0.5).abs() < 1e-15);
//! ```

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rounding allowance in `H_ij >= (H_i + H_j)/2`, so that a co-Hurst
/// exponent typed as the decimal mean of its marginals is accepted.
pub const H1_SLACK: f64 = 1e-12;

/// Dense row-major square matrix.
pub type Matrix = Vec<Vec<f64>>;

/// Full parameter set of the multivariate model.
///
/// Serialized with the keys `d`, `T`, `H` and `xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "H")]
    pub h: Matrix,
    pub xi: Matrix,
}

impl ModelParams {
    /// Builds a parameter set, checking only the shapes.
    ///
    /// Admissibility is a separate question answered by [`validate`].
    pub fn new(t: f64, h: Matrix, xi: Matrix) -> Result<Self> {
        let p = ModelParams { d: h.len(), t, h, xi };
        p.check_shape()?;
        Ok(p)
    }

    /// Single marginal with Hurst exponent `h` and intermittency `lambda2`.
    pub fn univariate(t: f64, h: f64, lambda2: f64) -> Self {
        ModelParams { d: 1, t, h: vec![vec![h]], xi: vec![vec![lambda2]] }
    }

    /// Homogeneous model: common marginal Hurst `h_diag`, common co-Hurst
    /// `h_cross`, common intermittency and a single correlation `g`.
    pub fn homogeneous(d: usize, t: f64, h_diag: f64, h_cross: f64, lambda2: f64, g: f64) -> Self {
        let mut h = vec![vec![h_cross; d]; d];
        let mut xi = vec![vec![g * lambda2; d]; d];
        for i in 0..d {
            h[i][i] = h_diag;
            xi[i][i] = lambda2;
        }
        ModelParams { d, t, h, xi }
    }

    /// Two marginals with equal Hurst exponent and intermittency.
    pub fn bivariate(t: f64, h_diag: f64, lambda2: f64, h12: f64, g: f64) -> Self {
        Self::homogeneous(2, t, h_diag, h12, lambda2, g)
    }

    /// Reads and shape-checks a JSON document.
    pub fn from_json(s: &str) -> Result<Self> {
        let p: ModelParams = serde_json::from_str(s)?;
        p.check_shape()?;
        Ok(p)
    }

    /// JSON with every float written to 17 significant digits.
    pub fn to_json(&self) -> Result<String> {
        crate::io::to_json_string(self)
    }

    pub fn h_diag(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.h[i][i]).collect()
    }

    pub fn lambda2_diag(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.xi[i][i]).collect()
    }

    /// Structural check: `d` agrees with both matrices, everything is finite.
    pub fn check_shape(&self) -> Result<()> {
        let d = self.d;
        if d == 0 {
            return Err(Error::Dimension("d must be at least 1".into()));
        }
        for (name, m) in [("H", &self.h), ("xi", &self.xi)] {
            if m.len() != d || m.iter().any(|r| r.len() != d) {
                return Err(Error::Dimension(format!("{name} is not {d}x{d}")));
            }
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Dimension(format!("{name} has non-finite entries")));
            }
        }
        if !self.t.is_finite() {
            return Err(Error::Dimension("T is not finite".into()));
        }
        Ok(())
    }

    /// The 2x2 restriction on marginals `i` and `j`.
    pub fn pair(&self, i: usize, j: usize) -> Result<PairParams> {
        if i >= self.d || j >= self.d {
            return Err(Error::Dimension(format!("pair ({i},{j}) out of range for d={}", self.d)));
        }
        let (li, lj) = (self.xi[i][i], self.xi[j][j]);
        if li <= 0.0 || lj <= 0.0 {
            return Err(Error::Inadmissible(format!("zero intermittency in pair ({i},{j})")));
        }
        Ok(PairParams {
            g: self.xi[i][j] / (li * lj).sqrt(),
            h_ij: self.h[i][j],
            lambda_i2: li,
            lambda_j2: lj,
            h_i: self.h[i][i],
            h_j: self.h[j][j],
            t: self.t,
        })
    }

    /// Matrix of co-intermittency correlations `xi_ij / (lambda_i lambda_j)`.
    pub fn g_matrix(&self) -> Result<Matrix> {
        g_from_xi(self)
    }

    /// Same model with marginals reordered: entry `k` of the result is
    /// marginal `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.d || perm.iter().any(|&p| p >= self.d) {
            return Err(Error::Dimension("permutation does not match d".into()));
        }
        let pick = |m: &Matrix| -> Matrix {
            perm.iter().map(|&a| perm.iter().map(|&b| m[a][b]).collect()).collect()
        };
        Ok(ModelParams { d: self.d, t: self.t, h: pick(&self.h), xi: pick(&self.xi) })
    }

    /// Eigenvalues of `xi` in increasing order.
    pub fn xi_eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.xi)
    }
}

pub(crate) fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let d = m.len();
    let a = DMatrix::from_fn(d, d, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Parameters of one pair of marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    /// Co-intermittency correlation.
    pub g: f64,
    /// Co-Hurst exponent.
    pub h_ij: f64,
    pub lambda_i2: f64,
    pub lambda_j2: f64,
    pub h_i: f64,
    pub h_j: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

impl PairParams {
    /// Pair of a marginal with itself.
    pub fn diagonal(h: f64, lambda2: f64, t: f64) -> Self {
        PairParams { g: 1.0, h_ij: h, lambda_i2: lambda2, lambda_j2: lambda2, h_i: h, h_j: h, t }
    }

    /// Mean of the two marginal Hurst exponents.
    pub fn h_bar(&self) -> f64 {
        0.5 * (self.h_i + self.h_j)
    }

    /// Co-intermittency `g * lambda_i * lambda_j`.
    pub fn xi(&self) -> f64 {
        self.g * (self.lambda_i2 * self.lambda_j2).sqrt()
    }

    pub fn lambda_prod(&self) -> f64 {
        (self.lambda_i2 * self.lambda_j2).sqrt()
    }

    /// The same pair with both intermittencies multiplied by `s`.
    pub fn scale_intermittency(&self, s: f64) -> Self {
        PairParams { lambda_i2: self.lambda_i2 * s, lambda_j2: self.lambda_j2 * s, ..*self }
    }

    /// Violated pair invariants; empty when admissible.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.t > 0.0) {
            v.push(format!("T={} must be positive", self.t));
        }
        if !(self.g.abs() <= 1.0) {
            v.push(format!("|g|={} exceeds 1", self.g.abs()));
        }
        for (name, h) in [("H_ij", self.h_ij), ("H_i", self.h_i), ("H_j", self.h_j)] {
            if !(0.0..0.5).contains(&h) {
                v.push(format!("{name}={h} outside [0, 1/2)"));
            }
        }
        if self.h_ij < self.h_bar() - H1_SLACK {
            v.push(format!("H_ij={} below (H_i+H_j)/2={}", self.h_ij, self.h_bar()));
        }
        if !(self.lambda_i2 > 0.0 && self.lambda_j2 > 0.0) {
            v.push("intermittencies must be positive".into());
        }
        v
    }

    pub fn check(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Inadmissible(v.join("; ")))
        }
    }
}

/// One violated admissibility condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonPositiveT { t: f64 },
    AsymmetricH { i: usize, j: usize },
    AsymmetricXi { i: usize, j: usize },
    HurstOutOfRange { i: usize, j: usize, value: f64 },
    ZeroOffDiagonalHurst { i: usize, j: usize },
    NonPositiveIntermittency { i: usize, value: f64 },
    /// `H_ij < (H_i + H_j)/2`.
    CoHurstBelowMean { i: usize, j: usize, h_ij: f64, h_bar: f64 },
    /// `|xi_ij| > lambda_i lambda_j`.
    CauchySchwarz { i: usize, j: usize, xi: f64, bound: f64 },
    /// Smallest eigenvalue of `xi` below the rounding floor.
    NotPositiveSemidefinite { min_eigenvalue: f64, floor: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NonPositiveT { t } => write!(f, "T={t} is not positive"),
            AsymmetricH { i, j } => write!(f, "H[{i}][{j}] != H[{j}][{i}]"),
            AsymmetricXi { i, j } => write!(f, "xi[{i}][{j}] != xi[{j}][{i}]"),
            HurstOutOfRange { i, j, value } => write!(f, "H[{i}][{j}]={value} outside [0, 1/2)"),
            ZeroOffDiagonalHurst { i, j } => write!(f, "H[{i}][{j}]=0 off the diagonal"),
            NonPositiveIntermittency { i, value } => write!(f, "lambda^2[{i}]={value} is not positive"),
            CoHurstBelowMean { i, j, h_ij, h_bar } => {
                write!(f, "H1 violated at ({i},{j}): H_ij={h_ij} < (H_i+H_j)/2={h_bar}")
            }
            CauchySchwarz { i, j, xi, bound } => {
                write!(f, "|xi[{i}][{j}]|={} exceeds lambda_i lambda_j={bound}", xi.abs())
            }
            NotPositiveSemidefinite { min_eigenvalue, floor } => {
                write!(f, "H2 violated: xi has eigenvalue {min_eigenvalue} < {floor}")
            }
        }
    }
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_admissible() {
            Ok(())
        } else {
            let msg: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::Inadmissible(msg.join("; ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "admissible");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Lists every violated admissibility condition.
///
/// Shape problems are returned as `Err`; admissibility problems go in the
/// report. Positive semidefiniteness of `xi` is accepted down to
/// `-1e-10 * trace / d`.
pub fn validate(params: &ModelParams) -> Result<ValidationReport> {
    params.check_shape()?;
    let d = params.d;
    let (h, xi) = (&params.h, &params.xi);
    let mut out = Vec::new();
    if !(params.t > 0.0) {
        out.push(Violation::NonPositiveT { t: params.t });
    }
    for i in 0..d {
        if !(xi[i][i] > 0.0) {
            out.push(Violation::NonPositiveIntermittency { i, value: xi[i][i] });
        }
    }
    for i in 0..d {
        for j in 0..d {
            if j > i {
                if h[i][j] != h[j][i] {
                    out.push(Violation::AsymmetricH { i, j });
                }
                if xi[i][j] != xi[j][i] {
                    out.push(Violation::AsymmetricXi { i, j });
                }
            }
            if j < i {
                continue;
            }
            let v = h[i][j];
            if !(0.0..0.5).contains(&v) {
                out.push(Violation::HurstOutOfRange { i, j, value: v });
            }
            if i != j {
                if v == 0.0 {
                    out.push(Violation::ZeroOffDiagonalHurst { i, j });
                }
                let h_bar = 0.5 * (h[i][i] + h[j][j]);
                if v < h_bar - H1_SLACK {
                    out.push(Violation::CoHurstBelowMean { i, j, h_ij: v, h_bar });
                }
                let bound = (xi[i][i].max(0.0) * xi[j][j].max(0.0)).sqrt();
                if xi[i][j].abs() > bound {
                    out.push(Violation::CauchySchwarz { i, j, xi: xi[i][j], bound });
                }
            }
        }
    }
    let trace: f64 = (0..d).map(|i| xi[i][i]).sum();
    let floor = -1e-10 * trace.abs() / d as f64;
    let min_eig = symmetric_eigenvalues(xi)[0];
    if min_eig < floor {
        out.push(Violation::NotPositiveSemidefinite { min_eigenvalue: min_eig, floor });
    }
    Ok(ValidationReport { violations: out })
}

/// Co-intermittency correlations `g_ij = xi_ij / (lambda_i lambda_j)`.
pub fn g_from_xi(params: &ModelParams) -> Result<Matrix> {
    params.check_shape()?;
    let l = params.lambda2_diag();
    if let Some(i) = l.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Inadmissible(format!("lambda^2[{i}]={} is not positive", l[i])));
    }
    let d = params.d;
    Ok((0..d)
        .map(|i| {
            (0..d)
                .map(|j| if i == j { 1.0 } else { params.xi[i][j] / (l[i] * l[j]).sqrt() })
                .collect()
        })
        .collect())
}

/// Inverse of [`g_from_xi`]: `xi_ij = g_ij lambda_i lambda_j`.
pub fn xi_from_g(g: &Matrix, lambda2: &[f64]) -> Matrix {
    let d = lambda2.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| if i == j { lambda2[i] } else { g[i][j] * (lambda2[i] * lambda2[j]).sqrt() })
                .collect()
        })
        .collect()
}

/// Normalizing mean `-lambda^2 / (4H(1-2H))` that gives `E[exp(omega)] = 1`.
///
/// `H = 0` has no such constant: multifractal marginals take their mean from
/// the cut-off log kernel instead.
pub fn mu(lambda2: f64, h: f64) -> Result<f64> {
    if h == 0.0 {
        return Err(Error::Domain(
            "H=0 marginal: the mean comes from the cut-off log kernel".into(),
        ));
    }
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::Domain(format!("H={h} outside (0, 1/2)")));
    }
    Ok(-lambda2 / (4.0 * h * (1.0 - 2.0 * h)))
}

/// `nu^2 = lambda^2 / (H(1-2H))`.
pub fn nu2(lambda2: f64, h: f64) -> f64 {
    lambda2 / (h * (1.0 - 2.0 * h))
}
