//! Sequential against rayon scheduling for a single solve (per-coordinate
//! tridiagonal solves and per-time projections) and for a small tuning grid
//! (independent cells).

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use covbreak::adaptive::uniform_weights;
use covbreak::selection::{fit_grid, Estimator, GridConfig, TuningGrid};
use covbreak::synth::{make_scenario, Scenario, Setting};
use covbreak::{admm_solve, Execution, PenaltySpec, SolverOptions};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn single_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("admm_solve");
    group.sample_size(10);
    for (len, p) in [(200, 10), (400, 20)] {
        let (_, data) = make_scenario(&Scenario::new(Setting::I, len, p, 1, 7), 0).unwrap();
        let weights = uniform_weights(len, p);
        let spec = PenaltySpec::new(5e-5 * p as f64, 0.05 * p as f64);
        for (name, execution) in MODES {
            let options = SolverOptions {
                execution,
                ..SolverOptions::default()
            };
            group.bench_with_input(BenchmarkId::new(name, format!("T{len}_p{p}")), &data, |b, data| {
                b.iter(|| admm_solve(black_box(data), &spec, &weights, &options).unwrap())
            });
        }
    }
    group.finish();
}

fn grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_grid");
    group.sample_size(10);
    let p = 5;
    let (_, data) = make_scenario(&Scenario::new(Setting::I, 100, p, 1, 7), 0).unwrap();
    let pf = p as f64;
    let tuning = TuningGrid::new(
        vec![0.05 * pf],
        [0.03, 0.05, 0.07, 0.09].iter().map(|&s| (5e-5 * pf, s * pf)).collect(),
    )
    .unwrap();
    for (name, execution) in MODES {
        let mut config = GridConfig::new(tuning.clone(), Estimator::NonAdaptive);
        config.execution = execution;
        group.bench_function(BenchmarkId::new(name, "4_cells"), |b| {
            b.iter(|| fit_grid(black_box(&data), &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, single_solve, grid);
criterion_main!(benches);
