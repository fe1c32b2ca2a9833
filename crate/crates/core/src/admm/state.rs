use serde::{Deserialize, Serialize};

use crate::domain::{CovariancePath, ObservationSeries, PenaltySpec};
use crate::error::{Error, Result};
use crate::linalg::project_psd_slice;

/// Primal and dual blocks of the splitting.
///
/// `theta`, `v`, `upsilon`, `a` and `y` hold one block per time point. `d` and
/// `z` are indexed `t = 2..T` and hold `T - 1` blocks (entry `k` is time
/// `k + 2`); the boundary blocks `D_1 = D_{T+1} = Z_1 = Z_{T+1} = 0` are implicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub theta: CovariancePath,
    pub v: CovariancePath,
    /// Off-diagonal copies of `theta`; diagonals are exactly zero.
    pub upsilon: CovariancePath,
    pub d: CovariancePath,
    pub a: CovariancePath,
    /// Off-diagonal duals; diagonals are exactly zero.
    pub y: CovariancePath,
    pub z: CovariancePath,
    pub iteration: usize,
}

impl AdmmState {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }
}

/// Dual blocks produced by one ascent step.
#[derive(Clone, Debug, PartialEq)]
pub struct DualBlocks {
    pub a: CovariancePath,
    pub y: CovariancePath,
    pub z: CovariancePath,
}

/// Starts from the unpenalized least-squares fit `Θ_t = X_t X_tᵀ` with all
/// multipliers at zero.
pub fn initialize(data: &ObservationSeries, spec: &PenaltySpec) -> Result<AdmmState> {
    let theta = data.outer_products();
    initialize_from_outer(&theta, spec.epsilon)
}

pub(crate) fn initialize_from_outer(outer: &CovariancePath, epsilon: f64) -> Result<AdmmState> {
    let (len, p) = (outer.len(), outer.dim());
    if len == 0 {
        return Err(Error::Dimension("empty series".into()));
    }
    let theta = outer.clone();

    let mut v = CovariancePath::zeros(len, p);
    for i in 0..len {
        project_psd_slice(theta.block(i), p, epsilon, v.block_mut(i))?;
    }

    let upsilon = off_diagonal(&theta);

    let mut d = CovariancePath::zeros(len - 1, p);
    for k in 0..len - 1 {
        let (prev, next) = (theta.block(k), theta.block(k + 1));
        for (out, (x, y)) in d.block_mut(k).iter_mut().zip(next.iter().zip(prev)) {
            *out = x - y;
        }
    }

    Ok(AdmmState {
        theta,
        v,
        upsilon,
        d,
        a: CovariancePath::zeros(len, p),
        y: CovariancePath::zeros(len, p),
        z: CovariancePath::zeros(len - 1, p),
        iteration: 0,
    })
}

/// Copy of the path with every diagonal entry set to zero.
pub(crate) fn off_diagonal(path: &CovariancePath) -> CovariancePath {
    let p = path.dim();
    let mut out = path.clone();
    for i in 0..out.len() {
        let b = out.block_mut(i);
        for u in 0..p {
            b[u * p + u] = 0.0;
        }
    }
    out
}
