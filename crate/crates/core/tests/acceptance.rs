//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,4,9` restricts the run to the listed criteria.
//! `ACCEPTANCE_STRICT=1` turns any FAIL into a nonzero exit status.

use std::time::Instant;

use covbreak::adaptive::uniform_weights;
use covbreak::admm::{admm_solve, group_shrink, soft_threshold, solve_theta_block, AdmmSolution, Termination};
use covbreak::experiments::{timing_sweep, Stage, SweepAxis, TimingConfig};
use covbreak::segmentation::{
    extract_changepoints, f1_and_accuracy, hausdorff, kkt_residual, KktOptions,
    Support, SupportScope, DEFAULT_BREAK_TOL,
};
use covbreak::selection::{cell_metrics, fit_grid, score_cells, Criterion, Estimator, GridConfig, HbicBlocks, SelectionContext, TuningGrid};
use covbreak::synth::{make_scenario, Scenario, Setting};
use covbreak::{CovariancePath, ObservationSeries, PenaltySpec, SolverOptions, SymMatrix, WeightSet};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const EPSILON: f64 = 0.01;

type Check = (usize, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let checks: [Check; 11] = [
        (1, "small-instance oracle", small_instance_oracle),
        (2, "decoupled limit", decoupled_limit),
        (3, "fusion saturation", fusion_saturation),
        (4, "termination contract", termination_contract),
        (5, "tridiagonal solve", tridiagonal_solve),
        (6, "prox closed forms", prox_closed_forms),
        (7, "adaptive HBIC replication", adaptive_hbic_replication),
        (8, "no-break sanity", no_break_sanity),
        (9, "timing shape", timing_shape),
        (10, "KKT diagnostic", kkt_diagnostic),
        (11, "metric conventions", metric_conventions),
    ];

    let mut failed = Vec::new();
    for (id, name, check) in checks {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {verdict} {name} [{:.1}s]: {}",
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        if !outcome.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        if strict {
            std::process::exit(1);
        }
    }
}

fn gaussian_series(rng: &mut ChaCha8Rng, len: usize, p: usize) -> ObservationSeries {
    let data = (0..len * p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    ObservationSeries::new(len, p, data).unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, len: usize, p: usize) -> WeightSet {
    let mut xi1 = vec![0.0; len * p * p];
    for i in 0..len {
        for u in 0..p {
            for v in u + 1..p {
                let w = rng.random_range(0.5..2.0);
                xi1[i * p * p + u * p + v] = w;
                xi1[i * p * p + v * p + u] = w;
            }
        }
    }
    let xi2 = (1..len).map(|_| rng.random_range(0.5..2.0)).collect();
    WeightSet::new(CovariancePath::from_flat(len, p, xi1).unwrap(), xi2).unwrap()
}

/// `(λ₁, λ₂)` drawn uniformly from the range spanned by the tuning grid.
fn grid_range_pair(rng: &mut ChaCha8Rng, p: usize) -> (f64, f64) {
    let p = p as f64;
    (rng.random_range(1e-5 * p..=1e-4 * p), rng.random_range(1e-2 * p..=1e-1 * p))
}

fn outer(x: &[f64]) -> Vec<f64> {
    let p = x.len();
    (0..p * p).map(|k| x[k / p] * x[k % p]).collect()
}

fn fro(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Objective written out term by term from its definition.
fn objective(theta: &[Vec<f64>], data: &ObservationSeries, w: &WeightSet, l1: f64, l2: f64) -> f64 {
    let (len, p) = (data.len(), data.dim());
    let mut value = 0.0;
    for t in 0..len {
        let s = outer(data.observation(t));
        value += theta[t].iter().zip(&s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * len as f64);
        for u in 0..p {
            for v in 0..p {
                if u != v {
                    value += l1 * w.lasso_weight(t, u, v) * theta[t][u * p + v].abs();
                }
            }
        }
        if t >= 1 {
            let diff: Vec<f64> = theta[t].iter().zip(&theta[t - 1]).map(|(a, b)| a - b).collect();
            value += l2 * w.fusion()[t - 1] * fro(&diff);
        }
    }
    value
}

fn blocks(path: &CovariancePath) -> Vec<Vec<f64>> {
    (0..path.len()).map(|i| path.block(i).to_vec()).collect()
}

/// Projection of a symmetric 2x2 matrix onto `{Θ ⪰ εI}` from its closed-form eigensystem.
fn project_2x2(m: &mut [f64]) {
    let (a, b, c) = (m[0], 0.5 * (m[1] + m[2]), m[3]);
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (hi, lo) = (mean + radius, mean - radius);
    if lo >= EPSILON {
        m[1] = b;
        m[2] = b;
        return;
    }
    if radius == 0.0 {
        let d = mean.max(EPSILON);
        m.copy_from_slice(&[d, 0.0, 0.0, d]);
        return;
    }
    // Spectral projector onto the top eigenvector: (M - lo·I)/(hi - lo).
    let top = [(a - lo) / (2.0 * radius), b / (2.0 * radius), (c - lo) / (2.0 * radius)];
    let (h, l) = (hi.max(EPSILON), lo.max(EPSILON));
    let off = (h - l) * top[1];
    m.copy_from_slice(&[l + (h - l) * top[0], off, off, l + (h - l) * top[2]]);
}

/// Projected subgradient descent with step `1/k`, keeping the best iterate.
fn subgradient_reference(data: &ObservationSeries, w: &WeightSet, l1: f64, l2: f64, iterations: usize) -> f64 {
    let (len, p) = (data.len(), data.dim());
    let s: Vec<Vec<f64>> = (0..len).map(|t| outer(data.observation(t))).collect();
    let mut theta: Vec<Vec<f64>> = s
        .iter()
        .map(|m| {
            let mut m = m.clone();
            project_2x2(&mut m);
            m
        })
        .collect();
    let mut best = objective(&theta, data, w, l1, l2);
    let mut grad = vec![vec![0.0; p * p]; len];
    for k in 1..=iterations {
        for t in 0..len {
            for e in 0..p * p {
                let (u, v) = (e / p, e % p);
                let mut g = (theta[t][e] - s[t][e]) / len as f64;
                if u != v {
                    g += l1 * w.lasso_weight(t, u, v) * sign(theta[t][e]);
                }
                grad[t][e] = g;
            }
        }
        for t in 1..len {
            let diff: Vec<f64> = theta[t].iter().zip(&theta[t - 1]).map(|(a, b)| a - b).collect();
            let norm = fro(&diff);
            if norm > 0.0 {
                let scale = l2 * w.fusion()[t - 1] / norm;
                for e in 0..p * p {
                    grad[t][e] += scale * diff[e];
                    grad[t - 1][e] -= scale * diff[e];
                }
            }
        }
        let step = 1.0 / k as f64;
        for t in 0..len {
            for e in 0..p * p {
                theta[t][e] -= step * grad[t][e];
            }
            project_2x2(&mut theta[t]);
        }
        best = best.min(objective(&theta, data, w, l1, l2));
    }
    best
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn tight_options() -> SolverOptions {
    SolverOptions {
        tol: 1e-6,
        max_iter: 200_000,
        ..SolverOptions::default()
    }
}

fn small_instance_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst, mut worst_above_bound, mut admm_lower): (f64, f64, usize) = (0.0, 0.0, 0);
    for _ in 0..10 {
        let len = if rng.random_bool(0.5) { 3 } else { 5 };
        let data = gaussian_series(&mut rng, len, 2);
        let (l1, l2) = grid_range_pair(&mut rng, 2);
        let w = uniform_weights(len, 2);
        let sol = admm_solve(&data, &PenaltySpec::new(l1, l2), &w, &tight_options()).unwrap();
        let admm = objective(&blocks(sol.theta()), &data, &w, l1, l2);
        let reference = subgradient_reference(&data, &w, l1, l2, 1_000_000);
        worst = worst.max((admm - reference).abs() / reference.abs());
        worst_above_bound = worst_above_bound.max((reference - sol.report.dual_objective) / reference.abs());
        admm_lower += usize::from(admm <= reference);
    }
    Outcome::new(
        worst <= 1e-3,
        format!(
            "max relative objective difference {worst:.2e} (bound 1e-3); ADMM at or below the reference in \
             {admm_lower}/10 instances; the reference exceeds the ADMM dual lower bound by up to {worst_above_bound:.2e} relative"
        ),
    )
}

/// `P_{⪰εI}(S)` through a nalgebra eigendecomposition.
fn eigen_projection(s: &[f64], p: usize) -> DMatrix<f64> {
    let eig = DMatrix::from_row_slice(p, p, s).symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.max(EPSILON));
    &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

fn decoupled_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let (len, p) = (20, 5);
        let data = gaussian_series(&mut rng, len, p);
        let sol = admm_solve(&data, &PenaltySpec::new(0.0, 1e-8), &uniform_weights(len, p), &tight_options()).unwrap();
        for t in 0..len {
            let target = eigen_projection(&outer(data.observation(t)), p);
            let got = sol.theta().block(t);
            for (k, g) in got.iter().enumerate() {
                worst = worst.max((g - target[(k / p, k % p)]).abs());
            }
        }
    }
    Outcome::new(worst <= 1e-3, format!("max entrywise error {worst:.2e} (bound 1e-3)"))
}

fn fusion_saturation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut nonzero = 0usize;
    let mut breaks = 0usize;
    for _ in 0..10 {
        let (len, p) = (rng.random_range(5..=40), rng.random_range(2..=5));
        let data = gaussian_series(&mut rng, len, p);
        let (l1, _) = grid_range_pair(&mut rng, p);
        let spec = PenaltySpec::new(l1, 1e6 * p as f64);
        let sol = admm_solve(&data, &spec, &uniform_weights(len, p), &SolverOptions::default()).unwrap();
        nonzero += sol.d().as_slice().iter().filter(|&&x| x != 0.0).count();
        breaks += extract_changepoints(sol.theta(), Some(sol.d()), DEFAULT_BREAK_TOL).num_breaks();
    }
    Outcome::new(
        nonzero == 0 && breaks == 0,
        format!("{nonzero} nonzero D entries, {breaks} breaks over 10 instances"),
    )
}

struct Recomputed {
    gap: f64,
    dfeas: f64,
}

/// Duality gap and dual feasibility of a returned state, from the Lagrangian
/// of the split problem: `W_t = (Θ_t - S_t)/T`, `A_t = W_t - Y_t - Z_t + Z_{t+1}`,
/// dual value `Σ_t [-(T/2)‖W_t‖² - ⟨W_t, S_t⟩ + ε tr A_t]`.
fn recompute(sol: &AdmmSolution, data: &ObservationSeries, w: &WeightSet, l1: f64, l2: f64) -> Recomputed {
    let (len, p) = (data.len(), data.dim());
    let big_t = len as f64;
    let st = &sol.state;
    let primal = objective(&blocks(&st.theta), data, w, l1, l2);
    let mut dual = 0.0;
    let mut dfeas1: f64 = 0.0;
    for t in 0..len {
        let s = outer(data.observation(t));
        let mut a = vec![0.0; p * p];
        let mut w_t = vec![0.0; p * p];
        for e in 0..p * p {
            w_t[e] = (st.theta.block(t)[e] - s[e]) / big_t;
            a[e] = w_t[e] - st.y.block(t)[e];
            if t >= 1 {
                a[e] -= st.z.block(t - 1)[e];
            }
            if t + 1 < len {
                a[e] += st.z.block(t)[e];
            }
        }
        let w_sq: f64 = w_t.iter().map(|x| x * x).sum();
        let w_s: f64 = w_t.iter().zip(&s).map(|(x, y)| x * y).sum();
        let trace: f64 = (0..p).map(|u| a[u * p + u]).sum();
        dual += -0.5 * big_t * w_sq - w_s + EPSILON * trace;
        let lam_min = DMatrix::from_row_slice(p, p, &a).symmetric_eigenvalues().min();
        dfeas1 = dfeas1.max((-lam_min).max(0.0) / (1.0 + fro(&a)));
    }
    let z_max = (0..len - 1).map(|k| fro(st.z.block(k))).fold(0.0, f64::max);
    let z_excess = (0..len - 1)
        .map(|k| fro(st.z.block(k)) - l2 * w.fusion()[k])
        .fold(0.0, f64::max);
    let mut y_max: f64 = 0.0;
    let mut y_excess: f64 = 0.0;
    for t in 0..len {
        for u in 0..p {
            for v in 0..p {
                let y = st.y.block(t)[u * p + v].abs();
                if u == v {
                    y_excess = y_excess.max(y);
                } else {
                    y_max = y_max.max(y);
                    y_excess = y_excess.max(y - l1 * w.lasso_weight(t, u, v));
                }
            }
        }
    }
    let dfeas = dfeas1.max(z_excess / (1.0 + z_max)).max(y_excess / (1.0 + y_max));
    Recomputed {
        gap: (primal - dual).abs() / (1.0 + primal.abs() + dual.abs()),
        dfeas,
    }
}

fn termination_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let options = SolverOptions {
        record_history: true,
        ..SolverOptions::default()
    };
    let (mut t1_runs, mut worst_measure, mut logged, mut duality_violations): (usize, f64, usize, usize) = (0, 0.0, 0, 0);
    for _ in 0..20 {
        let (len, p) = (rng.random_range(3..=30), rng.random_range(2..=4));
        let data = gaussian_series(&mut rng, len, p);
        let (l1, l2) = grid_range_pair(&mut rng, p);
        let w = random_weights(&mut rng, len, p);
        let sol = admm_solve(&data, &PenaltySpec::new(l1, l2), &w, &options).unwrap();
        if sol.report.terminated_by == Termination::T1 {
            t1_runs += 1;
            let r = recompute(&sol, &data, &w, l1, l2);
            worst_measure = worst_measure.max(r.gap.max(r.dfeas));
        }
        for log in &sol.history {
            logged += 1;
            if log.dual > log.primal + 1e-6 * (1.0 + log.primal.abs()) {
                duality_violations += 1;
            }
        }
    }
    Outcome::new(
        worst_measure <= 1e-3 && duality_violations == 0,
        format!(
            "{t1_runs}/20 runs ended by T1, worst recomputed max(gap, dfeas) {worst_measure:.2e}; \
             weak duality violated at {duality_violations} of {logged} logged iterations"
        ),
    )
}

fn random_symmetric_path(rng: &mut ChaCha8Rng, len: usize, p: usize) -> CovariancePath {
    let mut flat = vec![0.0; len * p * p];
    for i in 0..len {
        for u in 0..p {
            for v in u..p {
                let x = rng.random_range(-5.0..5.0);
                flat[i * p * p + u * p + v] = x;
                flat[i * p * p + v * p + u] = x;
            }
        }
    }
    CovariancePath::from_flat(len, p, flat).unwrap()
}

/// Stationarity of the Θ-subproblem for one coordinate, assembled densely:
/// `(1/T + β + β·[u≠v]) θ_t + β Σ_{s~t} (θ_t - θ_s) = ψ_t` on the path graph.
fn dense_coordinate_solve(rhs: &[f64], beta: f64, off_diagonal: bool) -> DVector<f64> {
    let len = rhs.len();
    let base = 1.0 / len as f64 + beta + if off_diagonal { beta } else { 0.0 };
    let mut m = DMatrix::<f64>::zeros(len, len);
    for t in 0..len {
        m[(t, t)] += base;
        if t + 1 < len {
            m[(t, t)] += beta;
            m[(t + 1, t + 1)] += beta;
            m[(t, t + 1)] -= beta;
            m[(t + 1, t)] -= beta;
        }
    }
    m.lu().solve(&DVector::from_column_slice(rhs)).unwrap()
}

fn tridiagonal_solve() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (len, p, beta) = (rng.random_range(1..=100), rng.random_range(1..=5), rng.random_range(0.1..=10.0));
        let psi = random_symmetric_path(&mut rng, len, p);
        let theta = solve_theta_block(&psi, beta);
        for u in 0..p {
            for v in 0..p {
                let rhs: Vec<f64> = (0..len).map(|t| psi.get(t, u, v)).collect();
                let dense = dense_coordinate_solve(&rhs, beta, u != v);
                let got = DVector::from_iterator(len, (0..len).map(|t| theta.get(t, u, v)));
                worst = worst.max((got - &dense).norm() / dense.norm());
            }
        }
    }
    Outcome::new(worst <= 1e-10, format!("max relative error {worst:.2e} (bound 1e-10)"))
}

/// Grid minimiser of `f` over `n` equally spaced points of `[lo, hi]`, with the spacing.
fn grid_argmin(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let h = (hi - lo) / (n - 1) as f64;
    let best = (0..n)
        .map(|i| lo + i as f64 * h)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    (best, h)
}

fn prox_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let n = 10_000;
    let mut soft_misses = 0;
    let mut group_misses = 0;
    for _ in 0..100 {
        let (x, tau) = (rng.random_range(-5.0..5.0), rng.random_range(0.0..3.0));
        let (z, h) = grid_argmin(-6.0, 6.0, n, |z| 0.5 * (z - x) * (z - x) + tau * z.abs());
        if (soft_threshold(x, tau) - z).abs() > h {
            soft_misses += 1;
        }

        let p = rng.random_range(1..=5);
        let xi = SymMatrix::from_row_slice(p, random_symmetric_path(&mut rng, 1, p).block(0)).unwrap();
        let norm = xi.frobenius_norm();
        let tau = rng.random_range(0.0..2.0 * norm);
        // The minimiser is a nonnegative multiple sΞ with s ∈ [0, 1].
        let (s, h) = grid_argmin(0.0, 1.0, n, |s| 0.5 * (1.0 - s) * (1.0 - s) * norm * norm + tau * s * norm);
        let got = group_shrink(&xi, tau);
        let err: f64 = got
            .as_slice()
            .iter()
            .zip(xi.as_slice())
            .map(|(g, x)| (g - s * x) * (g - s * x))
            .sum::<f64>()
            .sqrt();
        if err > h * norm {
            group_misses += 1;
        }
    }
    Outcome::new(
        soft_misses == 0 && group_misses == 0,
        format!("soft_threshold misses {soft_misses}/100, group_shrink misses {group_misses}/100"),
    )
}

const REPLICATIONS: u64 = 20;
const SEED: u64 = 2024;

/// Grid configuration shared by the replication criteria.
fn replication_config(estimator: Estimator) -> GridConfig {
    let mut config = GridConfig::new(TuningGrid::subgrid_for(10), estimator);
    config.spec.beta = 0.1;
    config.execution = covbreak::Execution::Sequential;
    config
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn adaptive_hbic_replication() -> Outcome {
    let scenario = Scenario::new(Setting::I, 200, 10, 1, SEED);
    let config = replication_config(Estimator::Adaptive);
    let (mut f1, mut acc, mut d_h, mut rmse, mut nb, mut f1_off, mut acc_off) =
        (vec![], vec![], vec![], vec![], vec![], vec![], vec![]);
    for rep in 0..REPLICATIONS {
        let (truth, data) = make_scenario(&scenario, rep).unwrap();
        let cells = fit_grid(&data, &config).unwrap();
        let ctx = SelectionContext {
            truth: Some(&truth),
            scope: SupportScope::AllEntries,
            ..SelectionContext::default()
        };
        let table = score_cells(&cells, &data, Criterion::Hbic, &ctx, HbicBlocks::default()).unwrap();
        let best = table.best().expect("at least one cell succeeded");
        let m = table.rows[best].metrics.unwrap();
        f1.push(m.f1);
        acc.push(m.acc);
        d_h.push(m.d_h);
        rmse.push(m.rmse);
        nb.push(m.nb as f64);
        let off = cell_metrics(cells[best].fit.as_ref().unwrap(), &truth, SupportScope::OffDiagonal).unwrap();
        f1_off.push(off.f1);
        acc_off.push(off.acc);
    }
    let (f1, acc, d_h, rmse) = (mean(&f1), mean(&acc), mean(&d_h), mean(&rmse));
    Outcome::new(
        (0.70..=0.92).contains(&f1) && (0.84..=0.96).contains(&acc) && d_h <= 50.0 && rmse <= 0.45,
        format!(
            "F1 {f1:.3} in [0.70, 0.92], acc {acc:.3} in [0.84, 0.96], d_h {d_h:.2} <= 50, error {rmse:.3} <= 0.45; \
             mean nb {:.2}; off-diagonal scope F1 {:.3}, acc {:.3}",
            mean(&nb),
            mean(&f1_off),
            mean(&acc_off)
        ),
    )
}

fn no_break_sanity() -> Outcome {
    let scenario = Scenario::new(Setting::I, 200, 10, 0, SEED);
    let config = replication_config(Estimator::NonAdaptive);
    let (mut nb, mut d_h) = (vec![], vec![]);
    for rep in 0..REPLICATIONS {
        let (truth, data) = make_scenario(&scenario, rep).unwrap();
        let cells = fit_grid(&data, &config).unwrap();
        let ctx = SelectionContext {
            truth: Some(&truth),
            ..SelectionContext::default()
        };
        let table = score_cells(&cells, &data, Criterion::Hbic, &ctx, HbicBlocks::default()).unwrap();
        let m = table.rows[table.best().expect("at least one cell succeeded")].metrics.unwrap();
        nb.push(m.nb as f64);
        d_h.push(m.d_h);
    }
    let zero = nb.iter().filter(|&&n| n == 0.0).count();
    let (nb, d_h) = (mean(&nb), mean(&d_h));
    Outcome::new(
        nb <= 0.3 && d_h <= 5.0,
        format!("mean nb {nb:.2} <= 0.3, mean d_h {d_h:.2} <= 5; {zero}/{REPLICATIONS} replications with no break"),
    )
}

fn timing_shape() -> Outcome {
    let base = TimingConfig::new(Scenario::new(Setting::I, 200, 10, 1, SEED));
    let lens = vec![50, 100, 200, 400];
    let rows = timing_sweep(&SweepAxis::Len(lens.clone()), &base, 10).unwrap();
    let mut monotone = true;
    let mut summary = Vec::new();
    for stage in [Stage::FirstStage, Stage::NonAdaptive, Stage::Adaptive] {
        let means: Vec<f64> = lens
            .iter()
            .map(|t| rows.iter().find(|r| r.stage == stage && r.value == t.to_string()).unwrap().mean)
            .collect();
        monotone &= means.windows(2).all(|w| w[0] < w[1]);
        let formatted: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
        summary.push(format!("{} [{}]", stage.name(), formatted.join(", ")));
    }
    let first = rows
        .iter()
        .find(|r| r.stage == Stage::FirstStage && r.value == "200")
        .unwrap()
        .mean;
    let soft = if (0.056..=5.6).contains(&first) { "within" } else { "outside" };
    Outcome::new(
        monotone,
        format!(
            "mean seconds over T = {lens:?}: {}; first stage at T = 200 {first:.3}s, {soft} 10x of 0.56s (soft)",
            summary.join("; ")
        ),
    )
}

fn kkt_diagnostic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..10 {
        let (len, p) = (5, 2);
        let data = gaussian_series(&mut rng, len, p);
        let (l1, l2) = grid_range_pair(&mut rng, p);
        let w = uniform_weights(len, p);
        let sol = admm_solve(&data, &PenaltySpec::new(l1, l2), &w, &tight_options()).unwrap();
        let options = KktOptions {
            epsilon: Some(EPSILON),
            ..KktOptions::default()
        };
        let residual = kkt_residual(sol.theta(), &data, &w, l1, l2, &options).unwrap();
        let scale = (0..len).map(|t| fro(&outer(data.observation(t)))).fold(0.0, f64::max);
        worst_ratio = worst_ratio.max(residual / (1e-3 * (1.0 + scale)));
    }
    Outcome::new(
        worst_ratio <= 1.0,
        format!("worst residual is {worst_ratio:.3} of the bound 1e-3(1 + max‖S_t‖_F)"),
    )
}

fn metric_conventions() -> Outcome {
    let cases = [
        hausdorff(&[], &[], 200) == 0.0,
        hausdorff(&[50], &[50], 200) == 0.0,
        hausdorff(&[], &[100, 150], 200) == 75.0,
    ];
    let empty: Vec<Support> = vec![Support::new(); 200];
    let (f1, acc) = f1_and_accuracy(&empty, &empty, 10).unwrap();
    let pass = cases.iter().all(|&c| c) && f1 == 1.0 && acc == 1.0;
    Outcome::new(
        pass,
        format!("Hausdorff cases {cases:?}; empty supports give F1 {f1}, acc {acc}"),
    )
}
