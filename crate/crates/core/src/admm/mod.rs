//! Alternating direction method of multipliers for the weighted group fused
//! least-squares problem with an eigenvalue floor.
//!
//! The splitting introduces a PSD copy `V`, an off-diagonal copy `Υ` carrying
//! the lasso term, and increments `D_t ≈ Θ_t - Θ_{t-1}` carrying the fusion
//! term, with multipliers `A`, `Y` and `Z` respectively.

pub mod objective;
pub mod prox;
pub mod solver;
pub mod state;
pub mod termination;
pub mod tridiag;

pub use objective::{dual_objective_and_feasibility, primal_objective, relative_gap, DualEvaluation};
pub use prox::{dual_ascent, group_shrink, soft_threshold, update_d, update_upsilon, update_v};
pub use solver::{admm_solve, admm_solve_outer, AdmmSolution, IterationLog, SolveReport, SolverOptions};
pub use state::{initialize, AdmmState, DualBlocks};
pub use termination::{check_termination, relative_change, stagnation_ratio, Decision, Termination};
pub use tridiag::{build_psi, solve_theta_block, solve_theta_block_with, theta_coefficients, TridiagonalSystem};
