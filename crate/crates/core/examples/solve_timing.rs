//! Times a first-stage fit on one simulated Setting I series.

use covbreak::adaptive::first_stage;
use covbreak::synth::{make_scenario, Scenario, Setting};
use covbreak::{PenaltySpec, SolverOptions};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let (len, p) = (args.first().copied().unwrap_or(200), args.get(1).copied().unwrap_or(10));
    let scenario = Scenario::new(Setting::I, len, p, 1, 1);
    let (truth, data) = make_scenario(&scenario, 0).expect("scenario");
    for scale in [0.01, 0.05, 0.1] {
        let sol = first_stage(&data, scale * p as f64, &PenaltySpec::default(), &SolverOptions::default()).expect("solve");
        let nb = sol.d().as_slice().chunks(p * p).filter(|b| b.iter().any(|&x| x != 0.0)).count();
        println!(
            "lambda={:.3} iters={} by={:?} gap={:.2e} dfeas={:.2e} time={:.3}s nb={} truth={:?}",
            scale * p as f64,
            sol.report.iterations,
            sol.report.terminated_by,
            sol.report.final_gap,
            sol.report.final_dfeas,
            sol.report.wall_time,
            nb,
            truth.breakpoints
        );
    }
}
