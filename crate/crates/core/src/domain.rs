//! Domain types shared across the crate.
//!
//! Time indices in the Rust API are zero-based (`i = t - 1`); change points in
//! a [`Segmentation`] are reported one-based, matching the usual convention
//! that a break at `t` means the estimate differs between `t - 1` and `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// `T` observations of a `p`-dimensional vector, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    len: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ObservationSeries {
    pub fn new(len: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if len == 0 || dim == 0 {
            return Err(Error::Dimension("series needs T >= 1 and p >= 1".into()));
        }
        if data.len() != len * dim {
            return Err(Error::Dimension(format!(
                "expected {} values for T={len}, p={dim}, got {}",
                len * dim,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("observation series"));
        }
        Ok(Self { len, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("ragged observation rows".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Dimension `p`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The path of outer products `X_t X_tᵀ`.
    pub fn outer_products(&self) -> CovariancePath {
        let p = self.dim;
        let mut out = CovariancePath::zeros(self.len, p);
        for i in 0..self.len {
            let x = self.observation(i);
            let block = out.block_mut(i);
            for u in 0..p {
                for v in 0..p {
                    block[u * p + v] = x[u] * x[v];
                }
            }
        }
        out
    }
}

/// A sequence of `p × p` symmetric matrices stored contiguously, time-major.
///
/// Also used for the auxiliary and dual blocks of the solver; sequences indexed
/// `t = 2..T` are stored with `T - 1` entries and may therefore be empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariancePath {
    len: usize,
    dim: usize,
    data: Vec<f64>,
}

impl CovariancePath {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            len,
            dim,
            data: vec![0.0; len * dim * dim],
        }
    }

    pub fn from_matrices(mats: &[SymMatrix]) -> Result<Self> {
        let dim = mats
            .first()
            .ok_or_else(|| Error::Dimension("path needs at least one matrix".into()))?
            .dim();
        if mats.iter().any(|m| m.dim() != dim) {
            return Err(Error::Dimension("path matrices differ in dimension".into()));
        }
        let mut data = Vec::with_capacity(mats.len() * dim * dim);
        for m in mats {
            data.extend_from_slice(m.as_slice());
        }
        Ok(Self {
            len: mats.len(),
            dim,
            data,
        })
    }

    /// Builds from flat row-major blocks, symmetrizing each.
    pub fn from_flat(len: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != len * dim * dim {
            return Err(Error::Dimension("flat path has the wrong length".into()));
        }
        let mut path = Self { len, dim, data };
        for i in 0..len {
            let b = path.block_mut(i);
            for u in 0..dim {
                for v in (u + 1)..dim {
                    let s = 0.5 * (b[u * dim + v] + b[v * dim + u]);
                    b[u * dim + v] = s;
                    b[v * dim + u] = s;
                }
            }
        }
        if path.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("covariance path"));
        }
        Ok(path)
    }

    /// Repeats each matrix over the given number of consecutive time points.
    pub fn piecewise(mats: &[SymMatrix], lengths: &[usize]) -> Result<Self> {
        if mats.len() != lengths.len() {
            return Err(Error::Dimension("one length per block is required".into()));
        }
        let mut expanded = Vec::with_capacity(lengths.iter().sum());
        for (m, &n) in mats.iter().zip(lengths) {
            expanded.extend(std::iter::repeat_n(m.clone(), n));
        }
        Self::from_matrices(&expanded)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let pp = self.dim * self.dim;
        &self.data[i * pp..(i + 1) * pp]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let pp = self.dim * self.dim;
        &mut self.data[i * pp..(i + 1) * pp]
    }

    pub fn matrix(&self, i: usize) -> SymMatrix {
        SymMatrix::from_symmetric_unchecked(self.dim, self.block(i).to_vec())
    }

    pub fn matrices(&self) -> Vec<SymMatrix> {
        (0..self.len).map(|i| self.matrix(i)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, u: usize, v: usize) -> f64 {
        self.data[(i * self.dim + u) * self.dim + v]
    }

    /// Stacked norm `(Σ_t ‖M_t‖_F²)^{1/2}`.
    pub fn stacked_norm(&self) -> f64 {
        crate::linalg::frobenius_norm(&self.data)
    }
}

/// Entrywise lasso weights `ξ_{uv,1t}` and fusion weights `ξ_{2t}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    xi1: CovariancePath,
    xi2: Vec<f64>,
}

impl WeightSet {
    /// `xi1` has one zero-diagonal nonnegative block per time point; `xi2` has
    /// `T - 1` positive entries for `t = 2..T`.
    pub fn new(xi1: CovariancePath, xi2: Vec<f64>) -> Result<Self> {
        if xi1.is_empty() || xi2.len() + 1 != xi1.len() {
            return Err(Error::Dimension(format!(
                "weights need T >= 1 lasso blocks and T - 1 fusion weights, got {} and {}",
                xi1.len(),
                xi2.len()
            )));
        }
        let p = xi1.dim();
        for i in 0..xi1.len() {
            let b = xi1.block(i);
            for u in 0..p {
                if b[u * p + u] != 0.0 {
                    return Err(Error::InvalidParameter("lasso weights must have a zero diagonal".into()));
                }
            }
            if b.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(Error::InvalidParameter("lasso weights must be finite and nonnegative".into()));
            }
        }
        if xi2.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("fusion weights must be finite and positive".into()));
        }
        Ok(Self { xi1, xi2 })
    }

    pub fn len(&self) -> usize {
        self.xi1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi1.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xi1.dim()
    }

    pub fn lasso(&self) -> &CovariancePath {
        &self.xi1
    }

    /// `ξ_{uv,1t}` at zero-based time `i`.
    pub fn lasso_weight(&self, i: usize, u: usize, v: usize) -> f64 {
        self.xi1.get(i, u, v)
    }

    /// Fusion weights; entry `k` is `ξ_{2t}` for `t = k + 2`.
    pub fn fusion(&self) -> &[f64] {
        &self.xi2
    }
}

/// Penalty levels and solver constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Eigenvalue floor of the feasible set `Θ ⪰ εI`.
    pub epsilon: f64,
    /// Augmented Lagrangian penalty.
    pub beta: f64,
    /// Dual step scale.
    pub gamma: f64,
}

impl PenaltySpec {
    pub const DEFAULT_EPSILON: f64 = 0.01;
    pub const DEFAULT_BETA: f64 = 1.0;
    pub const DEFAULT_GAMMA: f64 = 1.61;

    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            epsilon: Self::DEFAULT_EPSILON,
            beta: Self::DEFAULT_BETA,
            gamma: Self::DEFAULT_GAMMA,
        }
    }

    pub fn with_lambdas(self, lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let golden = (5f64.sqrt() + 1.0) / 2.0;
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.lambda1 >= 0.0) || !self.lambda1.is_finite() {
            return bad("lambda1 must be finite and >= 0");
        }
        if !(self.lambda2 > 0.0) || !self.lambda2.is_finite() {
            return bad("lambda2 must be finite and > 0");
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad("epsilon must be finite and > 0");
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return bad("beta must be finite and > 0");
        }
        if !(self.gamma > 0.0 && self.gamma < golden) {
            return bad("gamma must lie in (0, (sqrt(5)+1)/2)");
        }
        Ok(())
    }
}

impl Default for PenaltySpec {
    fn default() -> Self {
        Self::new(0.0, 1.0)
    }
}

/// Ordered change points with one covariance estimate per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// One-based, strictly increasing, each in `2..=T`.
    pub breakpoints: Vec<usize>,
    pub block_covs: Vec<SymMatrix>,
}

impl Segmentation {
    pub fn new(breakpoints: Vec<usize>, block_covs: Vec<SymMatrix>, len: usize) -> Result<Self> {
        if block_covs.len() != breakpoints.len() + 1 {
            return Err(Error::Dimension("need one block covariance per block".into()));
        }
        validate_breakpoints(&breakpoints, len)?;
        Ok(Self {
            breakpoints,
            block_covs,
        })
    }

    pub fn num_breaks(&self) -> usize {
        self.breakpoints.len()
    }

    /// Zero-based half-open time ranges of each block.
    pub fn block_ranges(&self, len: usize) -> Vec<std::ops::Range<usize>> {
        block_ranges(&self.breakpoints, len)
    }
}

pub(crate) fn validate_breakpoints(breakpoints: &[usize], len: usize) -> Result<()> {
    let mut prev = 1;
    for &b in breakpoints {
        if b <= prev || b > len {
            return Err(Error::Dimension(format!(
                "breakpoints must be strictly increasing within 2..={len}"
            )));
        }
        prev = b;
    }
    Ok(())
}

/// Zero-based half-open ranges `[T_{j-1} - 1, T_j - 1)` for one-based breakpoints.
pub fn block_ranges(breakpoints: &[usize], len: usize) -> Vec<std::ops::Range<usize>> {
    let mut starts = vec![0];
    starts.extend(breakpoints.iter().map(|b| b - 1));
    let mut ends: Vec<usize> = breakpoints.iter().map(|b| b - 1).collect();
    ends.push(len);
    starts.into_iter().zip(ends).map(|(s, e)| s..e).collect()
}
