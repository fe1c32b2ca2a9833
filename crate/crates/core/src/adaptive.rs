//! Two-stage adaptive estimation: a fusion-only first stage, data-driven
//! weights computed from its path, and a weighted second stage.

use serde::{Deserialize, Serialize};

use crate::admm::{admm_solve_outer, AdmmSolution, SolverOptions};
use crate::domain::{CovariancePath, ObservationSeries, PenaltySpec, WeightSet};
use crate::error::{Error, Result};
use crate::linalg::frobenius_norm;

/// Exponents and floor of the adaptive weights `max(|·|, a_T)^{-μ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    /// Floor `a_T`; `None` uses `T^{-1/2}`.
    pub a_t: Option<f64>,
    pub mu1: f64,
    pub mu2: f64,
}

impl AdaptiveParams {
    pub const DEFAULT_MU1: f64 = 0.8;
    pub const DEFAULT_MU2: f64 = 1.5;

    pub fn new(mu1: f64, mu2: f64) -> Self {
        Self { a_t: None, mu1, mu2 }
    }

    /// The floor used for a series of length `len`.
    pub fn floor_for(&self, len: usize) -> f64 {
        self.a_t.unwrap_or_else(|| (len as f64).powf(-0.5))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.mu1) || !positive(self.mu2) || !self.a_t.is_none_or(positive) {
            return Err(Error::InvalidParameter("a_T, mu1 and mu2 must be finite and > 0".into()));
        }
        Ok(())
    }
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self::new(Self::DEFAULT_MU1, Self::DEFAULT_MU2)
    }
}

/// All lasso weights (off the diagonal) and fusion weights equal to one.
pub fn uniform_weights(len: usize, p: usize) -> WeightSet {
    let mut xi1 = CovariancePath::zeros(len, p);
    for i in 0..len {
        let b = xi1.block_mut(i);
        for u in 0..p {
            for v in 0..p {
                if u != v {
                    b[u * p + v] = 1.0;
                }
            }
        }
    }
    WeightSet::new(xi1, vec![1.0; len.saturating_sub(1)]).expect("uniform weights are valid")
}

/// `ξ_{uv,1t} = max(|Θ̃_{uv,t}|, a_T)^{-μ₁}` off the diagonal and
/// `ξ_{2t} = max(‖Θ̃_t - Θ̃_{t-1}‖_F, a_T)^{-μ₂}`.
pub fn adaptive_weights(theta_tilde: &CovariancePath, params: &AdaptiveParams) -> Result<WeightSet> {
    params.validate()?;
    let (len, p) = (theta_tilde.len(), theta_tilde.dim());
    if len == 0 {
        return Err(Error::Dimension("empty preliminary path".into()));
    }
    let floor = params.floor_for(len);
    let mut xi1 = CovariancePath::zeros(len, p);
    for i in 0..len {
        let src = theta_tilde.block(i);
        let dst = xi1.block_mut(i);
        for u in 0..p {
            for v in 0..p {
                if u != v {
                    let k = u * p + v;
                    dst[k] = src[k].abs().max(floor).powf(-params.mu1);
                }
            }
        }
    }
    let mut diff = vec![0.0; p * p];
    let xi2 = (1..len)
        .map(|i| {
            for (k, d) in diff.iter_mut().enumerate() {
                *d = theta_tilde.block(i)[k] - theta_tilde.block(i - 1)[k];
            }
            frobenius_norm(&diff).max(floor).powf(-params.mu2)
        })
        .collect();
    WeightSet::new(xi1, xi2)
}

/// Both stages of an adaptive fit.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoStageFit {
    /// Uniform weights, `λ₁ = 0`, `λ₂ = λ`.
    pub first: AdmmSolution,
    /// Adaptive weights from the first-stage path, penalties `(λ₁, λ₂)`.
    pub second: AdmmSolution,
    pub weights: WeightSet,
}

/// Fusion-only fit with uniform weights and penalty `lambda`.
pub fn first_stage(
    data: &ObservationSeries,
    lambda: f64,
    spec: &PenaltySpec,
    options: &SolverOptions,
) -> Result<AdmmSolution> {
    first_stage_outer(&data.outer_products(), lambda, spec, options)
}

pub(crate) fn first_stage_outer(
    outer: &CovariancePath,
    lambda: f64,
    spec: &PenaltySpec,
    options: &SolverOptions,
) -> Result<AdmmSolution> {
    let weights = uniform_weights(outer.len(), outer.dim());
    admm_solve_outer(outer, &spec.with_lambdas(0.0, lambda), &weights, options)
}

/// Second-stage fit given a preliminary path.
pub fn second_stage(
    data: &ObservationSeries,
    theta_tilde: &CovariancePath,
    lambda1: f64,
    lambda2: f64,
    params: &AdaptiveParams,
    spec: &PenaltySpec,
    options: &SolverOptions,
) -> Result<(AdmmSolution, WeightSet)> {
    second_stage_outer(&data.outer_products(), theta_tilde, lambda1, lambda2, params, spec, options)
}

pub(crate) fn second_stage_outer(
    outer: &CovariancePath,
    theta_tilde: &CovariancePath,
    lambda1: f64,
    lambda2: f64,
    params: &AdaptiveParams,
    spec: &PenaltySpec,
    options: &SolverOptions,
) -> Result<(AdmmSolution, WeightSet)> {
    if theta_tilde.len() != outer.len() || theta_tilde.dim() != outer.dim() {
        return Err(Error::Dimension("preliminary path does not match the data".into()));
    }
    let weights = adaptive_weights(theta_tilde, params)?;
    let sol = admm_solve_outer(outer, &spec.with_lambdas(lambda1, lambda2), &weights, options)?;
    Ok((sol, weights))
}

/// Non-adaptive fit: uniform weights with penalties `(λ₁, λ₂)`.
pub fn non_adaptive_fit(
    data: &ObservationSeries,
    lambda1: f64,
    lambda2: f64,
    spec: &PenaltySpec,
    options: &SolverOptions,
) -> Result<AdmmSolution> {
    let weights = uniform_weights(data.len(), data.dim());
    admm_solve_outer(&data.outer_products(), &spec.with_lambdas(lambda1, lambda2), &weights, options)
}

/// First stage at `lambda`, adaptive weights from its Θ path, then the
/// second stage at `(lambda1, lambda2)`.
pub fn two_stage_fit(
    data: &ObservationSeries,
    lambda: f64,
    lambda1: f64,
    lambda2: f64,
    params: &AdaptiveParams,
    spec: &PenaltySpec,
    options: &SolverOptions,
) -> Result<TwoStageFit> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("first-stage lambda must be > 0".into()));
    }
    let outer = data.outer_products();
    let first = first_stage_outer(&outer, lambda, spec, options)?;
    let (second, weights) = second_stage_outer(&outer, first.theta(), lambda1, lambda2, params, spec, options)?;
    Ok(TwoStageFit { first, second, weights })
}
