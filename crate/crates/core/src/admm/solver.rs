//! The ADMM iteration: Θ-update, closed-form V/Υ/D updates, dual ascent and
//! the stopping rules, repeated until T1, T2 or the iteration cap.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::objective::{dual_evaluation, dual_value_and_bounds, primal_objective_outer, psd_violation, relative_gap};
use super::prox::{dual_ascent, update_d, update_upsilon, update_v};
use super::state::{initialize_from_outer, AdmmState};
use super::termination::{check_termination, stagnation_ratio, Decision, Termination};
use super::tridiag::{build_psi, solve_theta_block_with};
use crate::domain::{CovariancePath, ObservationSeries, PenaltySpec, WeightSet};
use crate::error::{Error, Result};
use crate::par::Execution;

/// Iteration controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Evaluate the duality gap every `gap_stride` iterations (1 = every iteration).
    pub gap_stride: usize,
    /// Keep a per-evaluation log of primal and dual values.
    pub record_history: bool,
    /// Scheduling of the per-coordinate tridiagonal solves and per-time projections.
    pub execution: Execution,
}

impl SolverOptions {
    pub const DEFAULT_TOL: f64 = 1e-3;
    pub const DEFAULT_MAX_ITER: usize = 20_000;

    pub fn with_tol(self, tol: f64) -> Self {
        Self { tol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidParameter("tol must be finite and > 0".into()));
        }
        if self.max_iter == 0 || self.gap_stride == 0 {
            return Err(Error::InvalidParameter("max_iter and gap_stride must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: Self::DEFAULT_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
            gap_stride: 1,
            record_history: false,
            execution: Execution::Sequential,
        }
    }
}

/// One entry of the optional iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub dfeas: f64,
}

/// Summary of a finished solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub terminated_by: Termination,
    pub final_gap: f64,
    pub final_dfeas: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Seconds.
    pub wall_time: f64,
}

/// Final iterate of a solve.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmSolution {
    /// All primal and dual blocks at termination.
    pub state: AdmmState,
    pub report: SolveReport,
    pub history: Vec<IterationLog>,
}

impl AdmmSolution {
    pub fn theta(&self) -> &CovariancePath {
        &self.state.theta
    }

    /// Eigenvalue-floored copy of Θ.
    pub fn v(&self) -> &CovariancePath {
        &self.state.v
    }

    /// Soft-thresholded off-diagonal copy of Θ; exact zeros mark the sparsity pattern.
    pub fn upsilon(&self) -> &CovariancePath {
        &self.state.upsilon
    }

    /// Group-shrunk increments for `t = 2..T`; exact zeros mark the absence of a break.
    pub fn d(&self) -> &CovariancePath {
        &self.state.d
    }
}

/// Solves the weighted fused problem for `data`.
pub fn admm_solve(
    data: &ObservationSeries,
    spec: &PenaltySpec,
    weights: &WeightSet,
    options: &SolverOptions,
) -> Result<AdmmSolution> {
    admm_solve_outer(&data.outer_products(), spec, weights, options)
}

/// Same as [`admm_solve`], taking the outer products `S_t = X_t X_tᵀ` directly.
pub fn admm_solve_outer(
    outer: &CovariancePath,
    spec: &PenaltySpec,
    weights: &WeightSet,
    options: &SolverOptions,
) -> Result<AdmmSolution> {
    spec.validate()?;
    options.validate()?;
    if weights.len() != outer.len() || weights.dim() != outer.dim() {
        return Err(Error::Dimension(format!(
            "weights are {}x{} but data is {}x{}",
            weights.len(),
            weights.dim(),
            outer.len(),
            outer.dim()
        )));
    }
    if outer.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("data"));
    }

    let start = Instant::now();
    let PenaltySpec {
        lambda1,
        lambda2,
        epsilon,
        beta,
        gamma,
    } = *spec;
    let exec = options.execution;
    let mut state = initialize_from_outer(outer, epsilon)?;
    let mut history = Vec::new();
    let mut terminated_by = Termination::MaxIter;

    for k in 1..=options.max_iter {
        let psi = build_psi(&state, outer, beta);
        let theta = solve_theta_block_with(&psi, beta, exec);
        let v = update_v(&theta, &state.a, epsilon, beta, exec)?;
        let upsilon = update_upsilon(&theta, &state.y, weights, lambda1, beta);
        let d = update_d(&theta, &state.z, weights, lambda2, beta);
        let duals = dual_ascent(&state, &theta, &v, &upsilon, &d, beta, gamma);

        let stagnation = stagnation_ratio(
            [&theta, &duals.a, &duals.y, &duals.z],
            [&state.theta, &state.a, &state.y, &state.z],
        );
        state = AdmmState {
            theta,
            v,
            upsilon,
            d,
            a: duals.a,
            y: duals.y,
            z: duals.z,
            iteration: k,
        };
        if !stagnation.is_finite() {
            return Err(Error::Diverged { iteration: k });
        }

        let (mut gap, mut dfeas) = (None, None);
        if k % options.gap_stride == 0 {
            let primal = primal_objective_outer(&state.theta, outer, weights, lambda1, lambda2);
            let mut eval = dual_value_and_bounds(&state, outer, weights, lambda1, lambda2, epsilon);
            let g = relative_gap(primal, eval.value);
            gap = Some(g);
            if options.record_history {
                eval.dfeas1 = psd_violation(&state, outer, None)?;
                history.push(IterationLog {
                    iteration: k,
                    primal,
                    dual: eval.value,
                    gap: g,
                    dfeas: eval.dfeas(),
                });
                dfeas = Some(eval.dfeas());
            } else if g.max(eval.dfeas()) <= options.tol {
                // dfeas1 only matters once everything else is within tolerance.
                eval.dfeas1 = psd_violation(&state, outer, Some(options.tol))?;
                dfeas = Some(eval.dfeas());
            }
        }

        match check_termination(gap, dfeas, stagnation, options.tol) {
            Decision::Continue => {}
            Decision::T1 => {
                terminated_by = Termination::T1;
                break;
            }
            Decision::T2 => {
                terminated_by = Termination::T2;
                break;
            }
        }
    }

    let primal = primal_objective_outer(&state.theta, outer, weights, lambda1, lambda2);
    let eval = dual_evaluation(&state, outer, weights, lambda1, lambda2, epsilon, None)?;
    let report = SolveReport {
        iterations: state.iteration,
        terminated_by,
        final_gap: relative_gap(primal, eval.value),
        final_dfeas: eval.dfeas(),
        primal_objective: primal,
        dual_objective: eval.value,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(AdmmSolution { state, report, history })
}
