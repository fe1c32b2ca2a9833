//! Tuning-parameter criteria and the grid-search driver.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaptive::{first_stage_outer, second_stage_outer, uniform_weights, AdaptiveParams};
use crate::admm::{admm_solve_outer, AdmmSolution, SolveReport, SolverOptions};
use crate::domain::{block_ranges, CovariancePath, ObservationSeries, PenaltySpec};
use crate::error::{Error, Result};
use crate::linalg::cholesky_lower;
use crate::par::Execution;
use crate::segmentation::{
    break_indices, evaluate_with, path_supports, MetricsRecord, Support, SupportScope, DEFAULT_BREAK_TOL,
};
use crate::synth::GroundTruth;

/// `(1/2T) Σ_t [‖Θ_t‖_F² - 2⟨S_t, Θ_t⟩]` with `S_t = X_t X_tᵀ`.
pub fn least_squares_loss(theta: &CovariancePath, data: &ObservationSeries) -> Result<f64> {
    check_shape(theta, data)?;
    let p = data.dim();
    let mut total = 0.0;
    for i in 0..theta.len() {
        let (th, x) = (theta.block(i), data.observation(i));
        let mut sq = 0.0;
        let mut cross = 0.0;
        for u in 0..p {
            for v in 0..p {
                let t = th[u * p + v];
                sq += t * t;
                cross += x[u] * x[v] * t;
            }
        }
        total += sq - 2.0 * cross;
    }
    Ok(total / (2.0 * theta.len() as f64))
}

/// `Σ_t [log det Θ_t + X_tᵀ Θ_t⁻¹ X_t]`, or `+∞` when some `Θ_t` is not
/// positive definite.
pub fn gaussian_loss(theta: &CovariancePath, data: &ObservationSeries) -> Result<f64> {
    check_shape(theta, data)?;
    let p = data.dim();
    let mut total = 0.0;
    let mut y = vec![0.0; p];
    for i in 0..theta.len() {
        let Some(l) = cholesky_lower(theta.block(i), p) else {
            return Ok(f64::INFINITY);
        };
        let x = data.observation(i);
        // Forward substitution L y = x gives xᵀΘ⁻¹x = ‖y‖².
        for u in 0..p {
            let s: f64 = (0..u).map(|k| l[u * p + k] * y[k]).sum();
            y[u] = (x[u] - s) / l[u * p + u];
        }
        let log_det: f64 = (0..p).map(|u| 2.0 * l[u * p + u].ln()).sum();
        total += log_det + y.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(total)
}

fn check_shape(theta: &CovariancePath, data: &ObservationSeries) -> Result<()> {
    if theta.len() != data.len() || theta.dim() != data.dim() {
        return Err(Error::Dimension("fitted path and data differ in shape".into()));
    }
    Ok(())
}

/// `(1/B) Σ_{i=2}^{B} 𝕃(Θ; 𝒳_i)` where `B` counts the training sample plus
/// the `held_out` samples.
pub fn lossval(theta: &CovariancePath, held_out: &[ObservationSeries]) -> Result<f64> {
    if held_out.is_empty() {
        return Err(Error::InvalidParameter("lossval needs at least one held-out sample".into()));
    }
    let b = (held_out.len() + 1) as f64;
    let mut total = 0.0;
    for sample in held_out {
        total += least_squares_loss(theta, sample)?;
    }
    Ok(total / b)
}

/// Zero and change structure of a fitted path, as counted by the information criteria.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPattern {
    /// One-based breaks.
    pub breakpoints: Vec<usize>,
    /// Off-diagonal support at each time point.
    pub supports: Vec<Support>,
    /// Nonzero diagonal entries at each time point.
    pub diag_nonzero: Vec<usize>,
    /// For `t = 2..T` (entry `t - 2`), ordered off-diagonal entries that change.
    pub changes: Vec<usize>,
}

impl FitPattern {
    /// Uses the exact zeros of the solver's `Υ` (supports) and `D` (changes).
    pub fn from_solution(sol: &AdmmSolution) -> Self {
        let (theta, d) = (sol.theta(), sol.d());
        let p = theta.dim();
        let changes = (0..d.len())
            .map(|k| {
                let b = d.block(k);
                (0..p * p).filter(|&j| j / p != j % p && b[j] != 0.0).count()
            })
            .collect();
        Self {
            breakpoints: break_indices(theta, Some(d), DEFAULT_BREAK_TOL),
            supports: path_supports(theta, Some(sol.upsilon())),
            diag_nonzero: diag_counts(theta),
            changes,
        }
    }

    /// Threshold-based pattern for an arbitrary path.
    pub fn from_path(theta: &CovariancePath, rel_tol: f64) -> Self {
        let p = theta.dim();
        let changes = (1..theta.len())
            .map(|i| {
                let (prev, next) = (theta.block(i - 1), theta.block(i));
                let scale = rel_tol * (1.0 + crate::linalg::frobenius_norm(prev));
                (0..p * p)
                    .filter(|&j| j / p != j % p && (next[j] - prev[j]).abs() > scale)
                    .count()
            })
            .collect();
        Self {
            breakpoints: break_indices(theta, None, rel_tol),
            supports: path_supports(theta, None),
            diag_nonzero: diag_counts(theta),
            changes,
        }
    }

    pub fn num_breaks(&self) -> usize {
        self.breakpoints.len()
    }
}

fn diag_counts(theta: &CovariancePath) -> Vec<usize> {
    let p = theta.dim();
    (0..theta.len())
        .map(|i| (0..p).filter(|&u| theta.get(i, u, u) != 0.0).count())
        .collect()
}

/// `𝕃 + p·log(T)·K` with `K` the changed off-diagonal entries over `t ≥ 2`
/// plus the nonzero off-diagonal entries at `t = 1`.
pub fn bic(theta: &CovariancePath, data: &ObservationSeries, pattern: &FitPattern) -> Result<f64> {
    let len = theta.len() as f64;
    let k = pattern.changes.iter().sum::<usize>() + pattern.supports.first().map_or(0, |s| s.len());
    Ok(least_squares_loss(theta, data)? + theta.dim() as f64 * len.ln() * k as f64)
}

/// Which blocks contribute to the within-segment complexity term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HbicBlocks {
    /// `j = 1..m̂`: the last block is left out, and with no breaks the term vanishes.
    #[default]
    Literal,
    /// `j = 1..m̂+1`.
    All,
}

/// Penalty `(log p·log T/T)·Σ_j K_j + (log T·p/T)·m̂`, with `K_j` the nonzero
/// entries `u ≥ v` at the start of block `j`.
pub fn hbic_penalty(pattern: &FitPattern, len: usize, p: usize, blocks: HbicBlocks) -> f64 {
    let t = len as f64;
    let m = pattern.num_breaks();
    let starts: Vec<usize> = block_ranges(&pattern.breakpoints, len).iter().map(|r| r.start).collect();
    let take = match blocks {
        HbicBlocks::Literal => m,
        HbicBlocks::All => m + 1,
    };
    let k_sum: usize = starts
        .iter()
        .take(take)
        .map(|&i| pattern.supports[i].len() / 2 + pattern.diag_nonzero[i])
        .sum();
    (p as f64).ln() * t.ln() / t * k_sum as f64 + t.ln() * p as f64 / t * m as f64
}

pub fn hbic(theta: &CovariancePath, data: &ObservationSeries, pattern: &FitPattern, blocks: HbicBlocks) -> Result<f64> {
    Ok(least_squares_loss(theta, data)? + hbic_penalty(pattern, theta.len(), theta.dim(), blocks))
}

/// [`hbic`] with the Gaussian loss in place of the least-squares loss.
pub fn hbicg(theta: &CovariancePath, data: &ObservationSeries, pattern: &FitPattern, blocks: HbicBlocks) -> Result<f64> {
    Ok(gaussian_loss(theta, data)? + hbic_penalty(pattern, theta.len(), theta.dim(), blocks))
}

/// Index of the best record: smallest `d_h`, then largest F₁, then smallest
/// RMSE, then earliest position.
pub fn oracle_select(records: &[MetricsRecord]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let c = &records[b];
                r.d_h
                    .total_cmp(&c.d_h)
                    .then(c.f1.total_cmp(&r.f1))
                    .then(r.rmse.total_cmp(&c.rmse))
                    .is_lt()
            }
        };
        if better {
            best = Some(i);
        }
    }
    best.ok_or(Error::EmptyCandidates)
}

/// Candidate penalties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    /// First-stage fusion penalties `λ`.
    pub lambdas: Vec<f64>,
    /// Second-stage `(λ₁, λ₂)` pairs.
    pub pairs: Vec<(f64, f64)>,
}

impl TuningGrid {
    pub fn new(lambdas: Vec<f64>, pairs: Vec<(f64, f64)>) -> Result<Self> {
        let grid = Self { lambdas, pairs };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.pairs.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite())
            || self.pairs.iter().any(|(a, b)| !(*a >= 0.0) || !(*b > 0.0) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::InvalidParameter("grid needs λ > 0, λ₁ >= 0, λ₂ > 0".into()));
        }
        Ok(())
    }

    /// Ten values each: `λ ∈ p·{0.01, …, 0.1}`, `λ₁ ∈ p·{1, …, 10}·10⁻⁵`,
    /// `λ₂ ∈ p·{1, …, 10}·10⁻²`, all `(λ₁, λ₂)` combinations.
    pub fn default_for(p: usize) -> Self {
        Self::from_steps(p, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10])
    }

    /// Every other value of [`TuningGrid::default_for`]: steps `{1, 3, 5, 7, 9}`.
    pub fn subgrid_for(p: usize) -> Self {
        Self::from_steps(p, &[1, 3, 5, 7, 9])
    }

    fn from_steps(p: usize, steps: &[u32]) -> Self {
        let p = p as f64;
        let lambdas = steps.iter().map(|&k| p * k as f64 * 1e-2).collect();
        let pairs = steps
            .iter()
            .flat_map(|&a| steps.iter().map(move |&b| (p * a as f64 * 1e-5, p * b as f64 * 1e-2)))
            .collect();
        Self { lambdas, pairs }
    }
}

/// Model-selection rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Oracle choice using the ground truth.
    Optimal,
    Lossval,
    Bic,
    Hbic,
    Hbicg,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::Optimal,
        Criterion::Lossval,
        Criterion::Bic,
        Criterion::Hbic,
        Criterion::Hbicg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Optimal => "optimal",
            Criterion::Lossval => "lossval",
            Criterion::Bic => "bic",
            Criterion::Hbic => "hbic",
            Criterion::Hbicg => "hbicg",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown criterion {s:?}")))
    }
}

/// Which estimator the grid fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    /// Two-stage fit: every `λ` paired with every `(λ₁, λ₂)`.
    Adaptive,
    /// Uniform weights; only the `(λ₁, λ₂)` pairs are used.
    NonAdaptive,
}

/// Everything a grid search needs besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub grid: TuningGrid,
    pub estimator: Estimator,
    pub params: AdaptiveParams,
    pub spec: PenaltySpec,
    pub options: SolverOptions,
    /// Scheduling of grid cells.
    pub execution: Execution,
    pub hbic_blocks: HbicBlocks,
}

impl GridConfig {
    pub fn new(grid: TuningGrid, estimator: Estimator) -> Self {
        Self {
            grid,
            estimator,
            params: AdaptiveParams::default(),
            spec: PenaltySpec::default(),
            options: SolverOptions::default(),
            execution: Execution::default(),
            hbic_blocks: HbicBlocks::default(),
        }
    }
}

/// One fitted grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    /// First-stage index, `None` for the non-adaptive estimator.
    pub i: Option<usize>,
    pub j: usize,
    pub lambda: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub fit: Result<CellFit>,
}

/// The parts of a solve the criteria and metrics need.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFit {
    pub theta: CovariancePath,
    /// Floored copy of the fit, positive definite by construction.
    pub v: CovariancePath,
    pub pattern: FitPattern,
    pub report: SolveReport,
    /// First-stage report when the cell is adaptive.
    pub first_report: Option<SolveReport>,
    /// Seconds spent on this cell's second-stage (or only) solve.
    pub wall_time: f64,
}

impl CellFit {
    fn from_solution(sol: AdmmSolution, first_report: Option<SolveReport>, wall_time: f64) -> Self {
        let pattern = FitPattern::from_solution(&sol);
        let AdmmSolution { state, report, .. } = sol;
        Self {
            theta: state.theta,
            v: state.v,
            pattern,
            report,
            first_report,
            wall_time,
        }
    }
}

/// Fits every cell of the grid. Solver failures are recorded per cell.
pub fn fit_grid(data: &ObservationSeries, config: &GridConfig) -> Result<Vec<GridCell>> {
    config.grid.validate()?;
    config.params.validate()?;
    let outer = data.outer_products();
    let (grid, spec, opts) = (&config.grid, &config.spec, &config.options);
    let exec = config.execution;

    match config.estimator {
        Estimator::NonAdaptive => {
            let weights = uniform_weights(data.len(), data.dim());
            Ok(exec.map(grid.pairs.len(), |j| {
                let (l1, l2) = grid.pairs[j];
                let start = Instant::now();
                let fit = admm_solve_outer(&outer, &spec.with_lambdas(l1, l2), &weights, opts)
                    .map(|sol| CellFit::from_solution(sol, None, start.elapsed().as_secs_f64()));
                GridCell {
                    i: None,
                    j,
                    lambda: None,
                    lambda1: l1,
                    lambda2: l2,
                    fit,
                }
            }))
        }
        Estimator::Adaptive => {
            let firsts: Vec<Result<AdmmSolution>> =
                exec.map(grid.lambdas.len(), |i| first_stage_outer(&outer, grid.lambdas[i], spec, opts));
            let n_pairs = grid.pairs.len();
            Ok(exec.map(grid.lambdas.len() * n_pairs, |cell| {
                let (i, j) = (cell / n_pairs, cell % n_pairs);
                let (l1, l2) = grid.pairs[j];
                let start = Instant::now();
                let fit = match &firsts[i] {
                    Ok(first) => {
                        second_stage_outer(&outer, first.theta(), l1, l2, &config.params, spec, opts).map(|(sol, _)| {
                            CellFit::from_solution(sol, Some(first.report.clone()), start.elapsed().as_secs_f64())
                        })
                    }
                    Err(e) => Err(e.clone()),
                };
                GridCell {
                    i: Some(i),
                    j,
                    lambda: Some(grid.lambdas[i]),
                    lambda1: l1,
                    lambda2: l2,
                    fit,
                }
            }))
        }
    }
}

/// Inputs some criteria need beyond the training data.
#[derive(Clone, Copy, Debug, Default)]
pub struct SelectionContext<'a> {
    pub held_out: &'a [ObservationSeries],
    pub truth: Option<&'a GroundTruth>,
    /// Entries scored by the support metrics.
    pub scope: SupportScope,
}

/// One row of a score table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub i: Option<usize>,
    pub j: usize,
    pub lambda: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Criterion value (`d_h` for the oracle); `NaN` when the cell failed.
    pub value: f64,
    pub nb: Option<usize>,
    pub wall_time: f64,
    /// Metrics against the truth, when a truth was supplied.
    pub metrics: Option<MetricsRecord>,
}

/// Criterion values over the whole grid, in grid order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub criterion: Criterion,
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    /// Index of the selected row, or `None` when every cell failed.
    pub fn best(&self) -> Option<usize> {
        let valid: Vec<usize> = (0..self.rows.len()).filter(|&k| !self.rows[k].value.is_nan()).collect();
        if valid.is_empty() {
            return None;
        }
        if self.criterion == Criterion::Optimal {
            let records: Vec<MetricsRecord> = valid.iter().map(|&k| self.rows[k].metrics.expect("oracle rows carry metrics")).collect();
            return oracle_select(&records).ok().map(|b| valid[b]);
        }
        // Strictly smaller wins, so ties go to the earliest cell.
        let mut best = valid[0];
        for &k in &valid[1..] {
            if self.rows[k].value < self.rows[best].value {
                best = k;
            }
        }
        Some(best)
    }

    /// CSV with columns `i, j, lambda, lambda1, lambda2, value, nb, wall_time`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,lambda,lambda1,lambda2,value,nb,wall_time")?;
        for r in &self.rows {
            let opt = |x: Option<String>| x.unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                opt(r.i.map(|v| v.to_string())),
                r.j,
                opt(r.lambda.map(|v| v.to_string())),
                r.lambda1,
                r.lambda2,
                r.value,
                opt(r.nb.map(|v| v.to_string())),
                r.wall_time
            )?;
        }
        Ok(())
    }
}

/// Metrics of a fitted cell against the truth, with supports from `Υ` and
/// the fitted `Θ` path for the error.
pub fn cell_metrics(fit: &CellFit, truth: &GroundTruth, scope: SupportScope) -> Result<MetricsRecord> {
    evaluate_with(
        &fit.pattern.breakpoints,
        &fit.pattern.supports,
        &fit.theta,
        &truth.breakpoints,
        &truth.supports_over_time(),
        &truth.path,
        scope,
    )
}

/// Evaluates `criterion` on every cell.
pub fn score_cells(
    cells: &[GridCell],
    data: &ObservationSeries,
    criterion: Criterion,
    ctx: &SelectionContext<'_>,
    blocks: HbicBlocks,
) -> Result<ScoreTable> {
    if criterion == Criterion::Optimal && ctx.truth.is_none() {
        return Err(Error::InvalidParameter("the oracle criterion needs the ground truth".into()));
    }
    if criterion == Criterion::Lossval && ctx.held_out.is_empty() {
        return Err(Error::InvalidParameter("lossval needs held-out samples".into()));
    }
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let (value, nb, wall_time, metrics) = match &cell.fit {
            Err(_) => (f64::NAN, None, 0.0, None),
            Ok(fit) => {
                let metrics = ctx.truth.map(|t| cell_metrics(fit, t, ctx.scope)).transpose()?;
                let value = match criterion {
                    Criterion::Optimal => metrics.expect("truth checked above").d_h,
                    Criterion::Lossval => lossval(&fit.theta, ctx.held_out)?,
                    Criterion::Bic => bic(&fit.theta, data, &fit.pattern)?,
                    Criterion::Hbic => hbic(&fit.theta, data, &fit.pattern, blocks)?,
                    Criterion::Hbicg => hbicg(&fit.theta, data, &fit.pattern, blocks)?,
                };
                (value, Some(fit.pattern.num_breaks()), fit.wall_time, metrics)
            }
        };
        rows.push(ScoreRow {
            i: cell.i,
            j: cell.j,
            lambda: cell.lambda,
            lambda1: cell.lambda1,
            lambda2: cell.lambda2,
            value,
            nb,
            wall_time,
            metrics,
        });
    }
    Ok(ScoreTable { criterion, rows })
}

/// Result of a grid search.
#[derive(Clone, Debug)]
pub struct GridSearch {
    pub cells: Vec<GridCell>,
    pub table: ScoreTable,
    /// Index into `cells` of the selected fit.
    pub best: usize,
}

impl GridSearch {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }

    pub fn best_fit(&self) -> &CellFit {
        self.cells[self.best].fit.as_ref().expect("the selected cell succeeded")
    }
}

/// Fits the grid and selects one cell by `criterion`.
pub fn grid_search(
    data: &ObservationSeries,
    config: &GridConfig,
    criterion: Criterion,
    ctx: &SelectionContext<'_>,
) -> Result<GridSearch> {
    let cells = fit_grid(data, config)?;
    let table = score_cells(&cells, data, criterion, ctx, config.hbic_blocks)?;
    let best = table.best().ok_or_else(|| match cells.iter().find_map(|c| c.fit.as_ref().err()) {
        Some(e) => e.clone(),
        None => Error::EmptyCandidates,
    })?;
    Ok(GridSearch { cells, table, best })
}
