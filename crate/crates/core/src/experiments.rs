//! Replication harness: repeated simulate, fit, select and score runs, wall
//! time sweeps and adaptive-exponent sensitivity tables.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaptive::{first_stage_outer, second_stage_outer, uniform_weights, AdaptiveParams};
use crate::admm::{admm_solve_outer, SolverOptions};
use crate::domain::PenaltySpec;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::segmentation::{MetricsRecord, SupportScope};
use crate::selection::{fit_grid, score_cells, Criterion, Estimator, GridConfig, HbicBlocks, SelectionContext, TuningGrid};
use crate::synth::{held_out_samples, make_scenario, Scenario};

/// Settings shared by every replication of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub grid: TuningGrid,
    pub estimator: Estimator,
    pub criteria: Vec<Criterion>,
    pub params: AdaptiveParams,
    pub spec: PenaltySpec,
    pub options: SolverOptions,
    /// Held-out samples drawn for the lossval criterion.
    pub held_out: usize,
    pub hbic_blocks: HbicBlocks,
    pub support_scope: SupportScope,
    /// Scheduling across replications. Grid cells inside a replication run sequentially.
    pub execution: Execution,
}

impl ExperimentConfig {
    /// Every criterion, one held-out sample, library defaults elsewhere.
    pub fn new(grid: TuningGrid, estimator: Estimator) -> Self {
        Self {
            grid,
            estimator,
            criteria: Criterion::ALL.to_vec(),
            params: AdaptiveParams::default(),
            spec: PenaltySpec::default(),
            options: SolverOptions::default(),
            held_out: 1,
            hbic_blocks: HbicBlocks::default(),
            support_scope: SupportScope::default(),
            execution: Execution::default(),
        }
    }

    fn grid_config(&self) -> GridConfig {
        GridConfig {
            grid: self.grid.clone(),
            estimator: self.estimator,
            params: self.params,
            spec: self.spec,
            options: self.options,
            execution: Execution::Sequential,
            hbic_blocks: self.hbic_blocks,
        }
    }
}

/// The fit a criterion chose in one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub criterion: Criterion,
    pub lambda: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub metrics: MetricsRecord,
}

/// Outcome of one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: u64,
    /// One entry per requested criterion, `None` when no cell could be scored.
    pub selections: Vec<(Criterion, Option<Selected>)>,
    /// Seconds summed over first-stage solves.
    pub first_stage_time: f64,
    /// Seconds summed over second-stage (or non-adaptive) solves.
    pub second_stage_time: f64,
    pub failed_cells: usize,
}

/// Runs one replication: simulate, fit the whole grid once, then let every criterion choose.
pub fn run_replication(scenario: &Scenario, config: &ExperimentConfig, replication: u64) -> Result<ReplicationResult> {
    let (truth, data) = make_scenario(scenario, replication)?;
    let held_out = if config.criteria.contains(&Criterion::Lossval) {
        held_out_samples(&truth, scenario.seed, replication, config.held_out)?
    } else {
        Vec::new()
    };
    let cells = fit_grid(&data, &config.grid_config())?;
    let ctx = SelectionContext {
        held_out: &held_out,
        truth: Some(&truth),
        scope: config.support_scope,
    };

    let mut selections = Vec::with_capacity(config.criteria.len());
    for &criterion in &config.criteria {
        let table = score_cells(&cells, &data, criterion, &ctx, config.hbic_blocks)?;
        let chosen = table.best().map(|k| {
            let row = &table.rows[k];
            Selected {
                criterion,
                lambda: row.lambda,
                lambda1: row.lambda1,
                lambda2: row.lambda2,
                metrics: row.metrics.expect("truth is always supplied"),
            }
        });
        selections.push((criterion, chosen));
    }

    let mut first_stage_time = 0.0;
    let mut seen = std::collections::BTreeSet::new();
    let mut second_stage_time = 0.0;
    let mut failed_cells = 0;
    for cell in &cells {
        match &cell.fit {
            Ok(fit) => {
                second_stage_time += fit.wall_time;
                if let (Some(i), Some(first)) = (cell.i, &fit.first_report) {
                    if seen.insert(i) {
                        first_stage_time += first.wall_time;
                    }
                }
            }
            Err(_) => failed_cells += 1,
        }
    }
    Ok(ReplicationResult {
        replication,
        selections,
        first_stage_time,
        second_stage_time,
        failed_cells,
    })
}

/// Mean metrics of one criterion over the successful replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub criterion: Criterion,
    /// Replications contributing to the means.
    pub count: usize,
    /// Replications excluded because nothing could be selected.
    pub excluded: usize,
    pub nb: f64,
    pub d_h: f64,
    pub f1: f64,
    pub acc: f64,
    pub rmse: f64,
}

/// Per-criterion means plus the raw replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationTable {
    pub scenario: Scenario,
    pub rows: Vec<AggregateRow>,
    pub replications: Vec<ReplicationResult>,
}

impl ReplicationTable {
    pub fn row(&self, criterion: Criterion) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.criterion == criterion)
    }

    /// CSV with columns `criterion, count, excluded, nb, d_h, f1, acc, rmse`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "criterion,count,excluded,nb,d_h,f1,acc,rmse")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.criterion.name(),
                r.count,
                r.excluded,
                r.nb,
                r.d_h,
                r.f1,
                r.acc,
                r.rmse
            )?;
        }
        Ok(())
    }
}

/// Arithmetic means per criterion, summed in replication order.
pub fn aggregate(scenario: &Scenario, criteria: &[Criterion], replications: Vec<ReplicationResult>) -> ReplicationTable {
    let rows = criteria
        .iter()
        .map(|&criterion| {
            let picked: Vec<MetricsRecord> = replications
                .iter()
                .filter_map(|r| r.selections.iter().find(|(c, _)| *c == criterion).and_then(|(_, s)| s.as_ref()))
                .map(|s| s.metrics)
                .collect();
            let n = picked.len();
            let mean = |f: fn(&MetricsRecord) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    picked.iter().map(f).sum::<f64>() / n as f64
                }
            };
            AggregateRow {
                criterion,
                count: n,
                excluded: replications.len() - n,
                nb: mean(|m| m.nb as f64),
                d_h: mean(|m| m.d_h),
                f1: mean(|m| m.f1),
                acc: mean(|m| m.acc),
                rmse: mean(|m| m.rmse),
            }
        })
        .collect();
    ReplicationTable {
        scenario: *scenario,
        rows,
        replications,
    }
}

/// Runs replications `0..n_reps` of `scenario` and aggregates them.
pub fn run_replications(scenario: &Scenario, config: &ExperimentConfig, n_reps: u64) -> Result<ReplicationTable> {
    if n_reps == 0 {
        return Err(Error::InvalidParameter("need at least one replication".into()));
    }
    config.grid.validate()?;
    let results = config
        .execution
        .map(n_reps as usize, |r| run_replication(scenario, config, r as u64));
    let replications = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(aggregate(scenario, &config.criteria, replications))
}

/// Quantity varied by a timing sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// First-stage penalty.
    Lambda(Vec<f64>),
    /// Second-stage `(λ₁, λ₂)`.
    LambdaPair(Vec<(f64, f64)>),
    Len(Vec<usize>),
    Dim(Vec<usize>),
}

impl SweepAxis {
    fn count(&self) -> usize {
        match self {
            SweepAxis::Lambda(v) => v.len(),
            SweepAxis::LambdaPair(v) => v.len(),
            SweepAxis::Len(v) => v.len(),
            SweepAxis::Dim(v) => v.len(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            SweepAxis::Lambda(_) => "lambda",
            SweepAxis::LambdaPair(_) => "lambda_pair",
            SweepAxis::Len(_) => "T",
            SweepAxis::Dim(_) => "p",
        }
    }
}

/// Fixed settings of a timing sweep; unset penalties default to
/// `λ = 0.05p`, `λ₁ = 5·10⁻⁵p`, `λ₂ = 0.05p`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingConfig {
    pub scenario: Scenario,
    pub lambda: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub params: AdaptiveParams,
    pub spec: PenaltySpec,
    pub options: SolverOptions,
}

impl TimingConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            lambda: None,
            lambda1: None,
            lambda2: None,
            params: AdaptiveParams::default(),
            spec: PenaltySpec::default(),
            options: SolverOptions::default(),
        }
    }
}

/// Stage of the estimator being timed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    FirstStage,
    NonAdaptive,
    Adaptive,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::FirstStage => "first_stage",
            Stage::NonAdaptive => "non_adaptive",
            Stage::Adaptive => "adaptive",
        }
    }
}

/// Wall-time statistics for one sweep value and stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub axis: String,
    /// Sweep value, formatted (`"λ₁;λ₂"` for pairs).
    pub value: String,
    pub stage: Stage,
    pub mean: f64,
    /// Sample standard deviation, 0 for a single replication.
    pub std: f64,
    pub reps: usize,
    pub mean_iterations: f64,
}

/// CSV with columns `axis, value, stage, mean, std, reps, mean_iterations`.
pub fn write_timing_csv<W: Write>(rows: &[TimingRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "axis,value,stage,mean,std,reps,mean_iterations")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.axis,
            r.value,
            r.stage.name(),
            r.mean,
            r.std,
            r.reps,
            r.mean_iterations
        )?;
    }
    Ok(())
}

/// Mean and standard deviation of solve wall times for each sweep value and
/// stage. Solves run one at a time so timings are not contended.
pub fn timing_sweep(axis: &SweepAxis, base: &TimingConfig, n_reps: u64) -> Result<Vec<TimingRow>> {
    if n_reps == 0 || axis.count() == 0 {
        return Err(Error::InvalidParameter("timing sweep needs values and replications".into()));
    }
    let mut rows = Vec::new();
    for k in 0..axis.count() {
        let mut scenario = base.scenario;
        let (mut lambda, mut pair) = (base.lambda, None);
        let value = match axis {
            SweepAxis::Lambda(v) => {
                lambda = Some(v[k]);
                v[k].to_string()
            }
            SweepAxis::LambdaPair(v) => {
                pair = Some(v[k]);
                format!("{};{}", v[k].0, v[k].1)
            }
            SweepAxis::Len(v) => {
                scenario.len = v[k];
                v[k].to_string()
            }
            SweepAxis::Dim(v) => {
                scenario.dim = v[k];
                v[k].to_string()
            }
        };
        let p = scenario.dim as f64;
        let lambda = lambda.unwrap_or(0.05 * p);
        let (l1, l2) = pair.unwrap_or((base.lambda1.unwrap_or(5e-5 * p), base.lambda2.unwrap_or(0.05 * p)));

        let mut samples: [Vec<(f64, usize)>; 3] = Default::default();
        for rep in 0..n_reps {
            let (_, data) = make_scenario(&scenario, rep)?;
            let outer = data.outer_products();

            let start = Instant::now();
            let first = first_stage_outer(&outer, lambda, &base.spec, &base.options)?;
            samples[0].push((start.elapsed().as_secs_f64(), first.report.iterations));

            let weights = uniform_weights(data.len(), data.dim());
            let start = Instant::now();
            let plain = admm_solve_outer(&outer, &base.spec.with_lambdas(l1, l2), &weights, &base.options)?;
            samples[1].push((start.elapsed().as_secs_f64(), plain.report.iterations));

            let start = Instant::now();
            let (second, _) = second_stage_outer(&outer, first.theta(), l1, l2, &base.params, &base.spec, &base.options)?;
            samples[2].push((start.elapsed().as_secs_f64(), second.report.iterations));
        }
        for (stage, s) in [Stage::FirstStage, Stage::NonAdaptive, Stage::Adaptive].into_iter().zip(&samples) {
            let n = s.len() as f64;
            let mean = s.iter().map(|x| x.0).sum::<f64>() / n;
            let var = if s.len() > 1 {
                s.iter().map(|x| (x.0 - mean) * (x.0 - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            rows.push(TimingRow {
                axis: axis.name().to_string(),
                value: value.clone(),
                stage,
                mean,
                std: var.sqrt(),
                reps: s.len(),
                mean_iterations: s.iter().map(|x| x.1 as f64).sum::<f64>() / n,
            });
        }
    }
    Ok(rows)
}

/// One `(μ₁, μ₂)` cell of a sensitivity sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub mu1: f64,
    pub mu2: f64,
    /// True for the library default exponents.
    pub is_default: bool,
    pub table: ReplicationTable,
}

/// [`run_replications`] over the cross product of exponents, `mu1` outer.
pub fn sensitivity_sweep(
    mu1s: &[f64],
    mu2s: &[f64],
    scenario: &Scenario,
    config: &ExperimentConfig,
    n_reps: u64,
) -> Result<Vec<SensitivityRow>> {
    let defaults = AdaptiveParams::default();
    let mut rows = Vec::with_capacity(mu1s.len() * mu2s.len());
    for &mu1 in mu1s {
        for &mu2 in mu2s {
            let mut cfg = config.clone();
            cfg.params = AdaptiveParams { mu1, mu2, ..config.params };
            cfg.params.validate()?;
            rows.push(SensitivityRow {
                mu1,
                mu2,
                is_default: mu1 == defaults.mu1 && mu2 == defaults.mu2,
                table: run_replications(scenario, &cfg, n_reps)?,
            });
        }
    }
    Ok(rows)
}
