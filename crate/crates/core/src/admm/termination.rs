//! Stopping rules: near primal-dual optimality (T1) or stagnation of the
//! iterates (T2).

use serde::{Deserialize, Serialize};

use crate::domain::CovariancePath;
use crate::linalg::frobenius_norm;

/// Outcome of a termination check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Continue,
    T1,
    T2,
}

/// Why a solve stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    T1,
    T2,
    MaxIter,
}

/// `‖new - old‖ / (1 + ‖new‖ + ‖old‖)` on stacked Frobenius norms.
pub fn relative_change(new: &CovariancePath, old: &CovariancePath) -> f64 {
    let diff: Vec<f64> = new
        .as_slice()
        .iter()
        .zip(old.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    frobenius_norm(&diff) / (1.0 + new.stacked_norm() + old.stacked_norm())
}

/// Largest relative successive change over the Θ, A, Y and Z blocks.
pub fn stagnation_ratio(new: [&CovariancePath; 4], old: [&CovariancePath; 4]) -> f64 {
    new.iter()
        .zip(old.iter())
        .map(|(n, o)| relative_change(n, o))
        .fold(0.0, f64::max)
}

/// T1 when `max(gap, dfeas) <= tol`; otherwise T2 when the stagnation ratio
/// is at most `tol / 1000`; otherwise continue. A `None` gap (not evaluated
/// this iteration) rules out T1.
pub fn check_termination(gap: Option<f64>, dfeas: Option<f64>, stagnation: f64, tol: f64) -> Decision {
    if let (Some(g), Some(d)) = (gap, dfeas) {
        if g.max(d) <= tol {
            return Decision::T1;
        }
    }
    if stagnation <= tol / 1000.0 {
        return Decision::T2;
    }
    Decision::Continue
}
