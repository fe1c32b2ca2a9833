//! Argument definitions and the subcommand implementations.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use covbreak::adaptive::{non_adaptive_fit, two_stage_fit, AdaptiveParams};
use covbreak::experiments::{timing_sweep, write_timing_csv, SweepAxis, TimingConfig};
use covbreak::segmentation::{evaluate_with, SupportScope};
use covbreak::selection::{grid_search, Criterion, Estimator, GridConfig, SelectionContext, TuningGrid};
use covbreak::synth::{make_scenario, Scenario, Setting};
use covbreak::{ObservationSeries, PenaltySpec, SolverOptions};

use crate::bundle::{write_diagnostics, Bundle, Parameters};
use crate::error::{Classify, CliError};
use crate::ingest::{ingest_csv, IngestOptions, Mode};
use crate::proxy::{rolling_proxy, DEFAULT_BLEND, DEFAULT_WINDOW};

type CmdResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(name = "covbreak", version, about = "Change-point detection and sparse covariance estimation")]
pub struct Cli {
    /// Worker threads for grid and replication parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one penalty setting and write a result bundle plus diagnostics.
    Fit(FitArgs),
    /// Draw synthetic series and their ground truth.
    Simulate(SimulateArgs),
    /// Fit a tuning grid and keep the fit chosen by a criterion.
    Select(SelectArgs),
    /// Score a result bundle against a ground-truth bundle.
    Metrics(MetricsArgs),
    /// Time the solver along one parameter axis.
    Timing(TimingArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with one observation (or price vector) per row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Returns)]
    pub mode: Mode,
    /// The first row holds data rather than column names.
    #[arg(long)]
    pub no_header: bool,
}

impl DataArgs {
    fn load(&self) -> Result<ObservationSeries, CliError> {
        ingest_csv(
            &self.input,
            IngestOptions {
                has_header: !self.no_header,
                mode: self.mode,
            },
        )
        .input()
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = PenaltySpec::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = PenaltySpec::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = SolverOptions::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = SolverOptions::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

impl SolverArgs {
    fn spec(&self) -> PenaltySpec {
        PenaltySpec {
            epsilon: self.epsilon,
            beta: self.beta,
            ..PenaltySpec::default()
        }
    }

    fn options(&self) -> Result<SolverOptions, CliError> {
        let options = SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverOptions::default()
        };
        options.validate()?;
        Ok(options)
    }

    fn parameters(&self, estimator: Estimator, lambda: Option<f64>, lambda1: f64, lambda2: f64, weights: &WeightArgs) -> Parameters {
        let adaptive = estimator == Estimator::Adaptive;
        Parameters {
            estimator: if adaptive { "adaptive" } else { "non-adaptive" }.to_string(),
            lambda,
            lambda1,
            lambda2,
            mu1: adaptive.then_some(weights.mu1),
            mu2: adaptive.then_some(weights.mu2),
            epsilon: self.epsilon,
            beta: self.beta,
            gamma: PenaltySpec::DEFAULT_GAMMA,
            tol: self.tol,
            max_iter: self.max_iter,
            criterion: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    #[arg(long, default_value_t = AdaptiveParams::DEFAULT_MU1)]
    pub mu1: f64,
    #[arg(long, default_value_t = AdaptiveParams::DEFAULT_MU2)]
    pub mu2: f64,
}

impl WeightArgs {
    fn params(&self) -> Result<AdaptiveParams, CliError> {
        let params = AdaptiveParams::new(self.mu1, self.mu2);
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub setting: u8,
    /// Series length.
    #[arg(long = "T", default_value_t = 200)]
    pub len: usize,
    /// Dimension.
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    /// Number of change points.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ScenarioArgs {
    fn scenario(&self) -> Result<Scenario, CliError> {
        if self.len == 0 || self.p == 0 {
            return Err(CliError::usage("--T and --p must be positive"));
        }
        let setting = Setting::from_index(self.setting).expect("range checked by clap");
        Ok(Scenario::new(setting, self.len, self.p, self.m, self.seed))
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// First-stage penalty; when given, the fit is adaptive.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda1: f64,
    #[arg(long)]
    pub lambda2: f64,
    /// Result bundle (JSON). Diagnostics go next to it as `<stem>.diagnostics.csv`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
    /// Directory receiving `series_<r>.csv` and `truth_<r>.json`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Optimal,
    Lossval,
    Bic,
    Hbic,
    Hbicg,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Optimal => Criterion::Optimal,
            CriterionArg::Lossval => Criterion::Lossval,
            CriterionArg::Bic => Criterion::Bic,
            CriterionArg::Hbic => Criterion::Hbic,
            CriterionArg::Hbicg => Criterion::Hbicg,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long, value_enum, default_value_t = CriterionArg::Hbic)]
    pub criterion: CriterionArg,
    /// JSON `{"lambdas": [...], "pairs": [[λ₁, λ₂], ...]}`; defaults to the standard grid for p.
    #[arg(long)]
    pub grid_file: Option<PathBuf>,
    /// Uniform weights over the grid's (λ₁, λ₂) pairs instead of the two-stage fit.
    #[arg(long)]
    pub non_adaptive: bool,
    /// Ground-truth bundle, required by `--criterion optimal`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Held-out series for `--criterion lossval` (repeatable).
    #[arg(long)]
    pub held_out: Vec<PathBuf>,
    /// Directory receiving `scores.csv`, `bundle.json` and `diagnostics.csv`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    OffDiagonal,
    AllEntries,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Estimated result bundle.
    #[arg(long)]
    pub input: PathBuf,
    /// Ground-truth bundle.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = ScopeArg::OffDiagonal)]
    pub scope: ScopeArg,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    #[value(name = "T")]
    Len,
    #[value(name = "p")]
    Dim,
    Lambda,
    LambdaPair,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// Comma-separated sweep values; pairs are written `λ₁:λ₂`.
    #[arg(long)]
    pub values: String,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub reps: u64,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().compute()?;
    }
    match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Metrics(args) => cmd_metrics(&args),
        Command::Timing(args) => cmd_timing(&args),
    }
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", path.display())).input()
}

fn write_fit_outputs(bundle: &Bundle, data: &ObservationSeries, theta: &covbreak::CovariancePath, bundle_path: &Path, diagnostics_path: &Path) -> CmdResult {
    bundle.write(bundle_path).input()?;
    let proxy = rolling_proxy(data, DEFAULT_WINDOW, DEFAULT_BLEND).compute()?;
    write_diagnostics(theta, &proxy, create(diagnostics_path)?).input()?;
    println!("changepoints: {:?}", bundle.changepoints);
    Ok(())
}

pub fn cmd_fit(args: &FitArgs) -> CmdResult {
    let data = args.data.load()?;
    let spec = args.solver.spec();
    let options = args.solver.options()?;
    let (sol, reports, estimator) = match args.lambda {
        Some(lambda) => {
            let fit = two_stage_fit(&data, lambda, args.lambda1, args.lambda2, &args.weights.params()?, &spec, &options)?;
            let reports = vec![fit.first.report.clone(), fit.second.report.clone()];
            (fit.second, reports, Estimator::Adaptive)
        }
        None => {
            let sol = non_adaptive_fit(&data, args.lambda1, args.lambda2, &spec, &options)?;
            let reports = vec![sol.report.clone()];
            (sol, reports, Estimator::NonAdaptive)
        }
    };
    let parameters = args.solver.parameters(estimator, args.lambda, args.lambda1, args.lambda2, &args.weights);
    let bundle = Bundle::from_solution(&sol, reports, parameters);
    let stem = args.output.file_stem().map_or("fit".into(), |s| s.to_string_lossy().into_owned());
    let diagnostics = args.output.with_file_name(format!("{stem}.diagnostics.csv"));
    write_fit_outputs(&bundle, &data, sol.theta(), &args.output, &diagnostics)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let scenario = args.scenario.scenario()?;
    std::fs::create_dir_all(&args.output).input()?;
    for rep in 0..args.reps {
        let (truth, data) = make_scenario(&scenario, rep)?;
        let mut csv = csv::Writer::from_writer(create(&args.output.join(format!("series_{rep}.csv")))?);
        csv.write_record((1..=data.dim()).map(|j| format!("x{j}"))).input()?;
        for t in 0..data.len() {
            csv.write_record(data.observation(t).iter().map(|x| x.to_string())).input()?;
        }
        csv.flush().input()?;
        Bundle::from_truth(&truth).write(&args.output.join(format!("truth_{rep}.json"))).input()?;
    }
    println!("wrote {} replication(s) to {}", args.reps, args.output.display());
    Ok(())
}

pub fn cmd_select(args: &SelectArgs) -> CmdResult {
    let data = args.data.load()?;
    let grid = match &args.grid_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).input()?;
            let grid: TuningGrid = serde_json::from_str(&text).input()?;
            grid.validate()?;
            grid
        }
        None => TuningGrid::default_for(data.dim()),
    };
    let estimator = if args.non_adaptive { Estimator::NonAdaptive } else { Estimator::Adaptive };
    let criterion = Criterion::from(args.criterion);
    let truth = args
        .truth
        .as_deref()
        .map(|p| Bundle::read(p).and_then(|b| b.to_truth()))
        .transpose()
        .input()?;
    if criterion == Criterion::Optimal && truth.is_none() {
        return Err(CliError::usage("--criterion optimal needs --truth"));
    }
    if criterion == Criterion::Lossval && args.held_out.is_empty() {
        return Err(CliError::usage("--criterion lossval needs at least one --held-out series"));
    }
    let held_out = args
        .held_out
        .iter()
        .map(|p| {
            ingest_csv(
                p,
                IngestOptions {
                    has_header: !args.data.no_header,
                    mode: args.data.mode,
                },
            )
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .input()?;

    let config = GridConfig {
        params: args.weights.params()?,
        spec: args.solver.spec(),
        options: args.solver.options()?,
        ..GridConfig::new(grid, estimator)
    };
    let ctx = SelectionContext {
        held_out: &held_out,
        truth: truth.as_ref(),
        ..SelectionContext::default()
    };
    let search = grid_search(&data, &config, criterion, &ctx)?;

    std::fs::create_dir_all(&args.output).input()?;
    search.table.write_csv(create(&args.output.join("scores.csv"))?).input()?;
    let cell = search.best_cell();
    let fit = search.best_fit();
    let mut parameters = args.solver.parameters(estimator, cell.lambda, cell.lambda1, cell.lambda2, &args.weights);
    parameters.criterion = Some(criterion.name().to_string());
    let reports = fit.first_report.iter().cloned().chain([fit.report.clone()]).collect();
    let bundle = Bundle::from_fit(&fit.v, &fit.pattern, reports, parameters);
    write_fit_outputs(
        &bundle,
        &data,
        &fit.theta,
        &args.output.join("bundle.json"),
        &args.output.join("diagnostics.csv"),
    )
}

pub fn cmd_metrics(args: &MetricsArgs) -> CmdResult {
    let est = Bundle::read(&args.input).input()?;
    let truth = Bundle::read(&args.truth).input()?;
    if est.len != truth.len || est.dim != truth.dim {
        return Err(CliError::usage(format!(
            "estimate is {}x{} but truth is {}x{}",
            est.len, est.dim, truth.len, truth.dim
        )));
    }
    let scope = match args.scope {
        ScopeArg::OffDiagonal => SupportScope::OffDiagonal,
        ScopeArg::AllEntries => SupportScope::AllEntries,
    };
    let m = evaluate_with(
        &est.changepoints,
        &est.supports_over_time(),
        &est.path().input()?,
        &truth.changepoints,
        &truth.supports_over_time(),
        &truth.path().input()?,
        scope,
    )?;
    let write = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "nb,d_h,f1,acc,rmse")?;
        writeln!(out, "{},{},{},{},{}", m.nb, m.d_h, m.f1, m.acc, m.rmse)
    };
    match &args.output {
        Some(path) => write(&mut create(path)?).input(),
        None => write(&mut std::io::stdout().lock()).input(),
    }
}

fn parse_values<T>(text: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|v| parse(v.trim()).ok_or_else(|| CliError::usage(format!("cannot parse sweep value {v:?}"))))
        .collect()
}

pub fn cmd_timing(args: &TimingArgs) -> CmdResult {
    let axis = match args.axis {
        AxisArg::Len => SweepAxis::Len(parse_values(&args.values, |v| v.parse().ok())?),
        AxisArg::Dim => SweepAxis::Dim(parse_values(&args.values, |v| v.parse().ok())?),
        AxisArg::Lambda => SweepAxis::Lambda(parse_values(&args.values, |v| v.parse().ok())?),
        AxisArg::LambdaPair => SweepAxis::LambdaPair(parse_values(&args.values, |v| {
            let (a, b) = v.split_once(':')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        })?),
    };
    let base = TimingConfig {
        lambda: args.lambda,
        lambda1: args.lambda1,
        lambda2: args.lambda2,
        params: args.weights.params()?,
        spec: args.solver.spec(),
        options: args.solver.options()?,
        ..TimingConfig::new(args.scenario.scenario()?)
    };
    let rows = timing_sweep(&axis, &base, args.reps)?;
    match &args.output {
        Some(path) => write_timing_csv(&rows, create(path)?).input(),
        None => write_timing_csv(&rows, std::io::stdout().lock()).input(),
    }
}
