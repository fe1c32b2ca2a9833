//! Symmetric matrices and the handful of dense kernels the solver needs.
//!
//! Matrices are small (p rarely exceeds 50), so everything is dense. Hot loops
//! work on flat row-major slices; [`SymMatrix`] is the validated public face.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;

/// A real symmetric `p × p` matrix.
///
/// Symmetry is enforced on construction through `(A + Aᵀ) / 2`, so the stored
/// entries satisfy `a[u][v] == a[v][u]` bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    p: usize,
    // Row-major; identical to column-major because of symmetry.
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Symmetrizes a square matrix. Fails on non-square or non-finite input.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let p = a.nrows();
        let mut entries = vec![0.0; p * p];
        for u in 0..p {
            for v in 0..p {
                entries[u * p + v] = 0.5 * (a[(u, v)] + a[(v, u)]);
            }
        }
        Self::checked(p, entries)
    }

    /// Builds from `p*p` row-major entries, symmetrizing them.
    pub fn from_row_slice(p: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != p * p {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {p}x{p} matrix, got {}",
                p * p,
                entries.len()
            )));
        }
        let mut sym = vec![0.0; p * p];
        for u in 0..p {
            for v in 0..p {
                sym[u * p + v] = 0.5 * (entries[u * p + v] + entries[v * p + u]);
            }
        }
        Self::checked(p, sym)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let p = diag.len();
        let mut entries = vec![0.0; p * p];
        for (u, d) in diag.iter().enumerate() {
            entries[u * p + u] = *d;
        }
        Self::checked(p, entries)
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            entries: vec![0.0; p * p],
        }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = Self::zeros(p);
        for u in 0..p {
            m.entries[u * p + u] = 1.0;
        }
        m
    }

    fn checked(p: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix"));
        }
        Ok(Self { p, entries })
    }

    /// Wraps entries that are already exactly symmetric.
    pub(crate) fn from_symmetric_unchecked(p: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), p * p);
        Self { p, entries }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.entries[u * self.p + v]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.p, self.p, &self.entries)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.p.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.entries)
    }

    pub fn offdiag_l1(&self) -> f64 {
        offdiag_l1(self)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues_slice(&self.entries, self.p)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// `self + c·I`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for u in 0..self.p {
            out.entries[u * self.p + u] += c;
        }
        out
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_row_slice(p, &flat)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// `√(Σ a²)` over all entries.
pub fn frobenius_norm(entries: &[f64]) -> f64 {
    entries.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sum of `|a_kl|` over ordered pairs `k ≠ l`.
pub fn offdiag_l1(a: &SymMatrix) -> f64 {
    let p = a.dim();
    let mut total = 0.0;
    for u in 0..p {
        for v in 0..p {
            if u != v {
                total += a.get(u, v).abs();
            }
        }
    }
    total
}

/// Euclidean projection of `s` onto `{M : M ⪰ floor·I}`.
pub fn project_psd(s: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    let p = s.dim();
    let mut out = vec![0.0; p * p];
    project_psd_slice(s.as_slice(), p, floor, &mut out)?;
    Ok(SymMatrix::from_symmetric_unchecked(p, out))
}

/// Slice version of [`project_psd`]; `src` and `dst` are row-major `p × p`.
///
/// When `src - floor·I` already admits a Cholesky factor the input is feasible
/// and copied through unchanged, skipping the eigendecomposition.
pub(crate) fn project_psd_slice(src: &[f64], p: usize, floor: f64, dst: &mut [f64]) -> Result<()> {
    if cholesky_succeeds(src, p, floor) {
        dst.copy_from_slice(src);
        return Ok(());
    }
    let eig = symmetric_eigen(src, p)?;
    let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(floor)).collect();
    let q = &eig.eigenvectors;
    for u in 0..p {
        for v in u..p {
            let mut acc = 0.0;
            for (k, lam) in lambdas.iter().enumerate() {
                acc += q[(u, k)] * lam * q[(v, k)];
            }
            dst[u * p + v] = acc;
            dst[v * p + u] = acc;
        }
    }
    Ok(())
}

pub(crate) fn symmetric_eigen(src: &[f64], p: usize) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if src.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let m = DMatrix::from_row_slice(p, p, src);
    SymmetricEigen::try_new(m, EIGEN_EPS, EIGEN_MAX_ITER).ok_or(Error::EigenFailure)
}

/// Ascending eigenvalues of a symmetric row-major slice.
pub(crate) fn eigenvalues_slice(src: &[f64], p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Ok(Vec::new());
    }
    let mut vals: Vec<f64> = symmetric_eigen(src, p)?.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// True when `src - shift·I` has a Cholesky factor with strictly positive pivots.
pub(crate) fn cholesky_succeeds(src: &[f64], p: usize, shift: f64) -> bool {
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = src[j * p + j] - shift;
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[j * p + j] = d;
        for i in (j + 1)..p {
            let mut s = src[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = s / d;
        }
    }
    true
}

/// Lower Cholesky factor (row-major) of a positive definite slice.
pub(crate) fn cholesky_lower(src: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = src[j * p + j];
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * p + j] = d;
        for i in (j + 1)..p {
            let mut s = src[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = s / d;
        }
    }
    Some(l)
}
