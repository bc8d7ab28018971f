//! End-to-end harness checks: determinism of experiment outputs, the
//! desk-run monotonicity of the optimality gap, and the cost-functional
//! cross-check against instrumented evaluation counts.

use std::fs;

use mice_core::harness::{
    build_problem, parse_experiment_config, run_experiment, run_replicate, total_sampling_cost,
};
use mice_core::optim::{run_sgd_mice, RunOptions, StoppingRule};
use mice_core::problems::{quadratic_problem, CountingProblem};
use mice_core::{ClippingMode, MiceConfig, RngStream};

const DESK_CONFIG: &str = "problem.name = quadratic\n\
problem.kappa = 100\n\
method.name = sgd-mice\n\
method.eps = 1.0\n\
mice.clipping = a\n\
run.max-iters = 600\n\
run.seed = 21\n";

#[test]
fn same_config_and_seed_give_byte_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |sub: &str| {
        let out = dir.path().join(sub);
        let text = format!("{DESK_CONFIG}output.dir = {}\n", out.display());
        let cfg = parse_experiment_config(&text).unwrap();
        run_experiment(&cfg).unwrap();
        fs::read(out.join("rep_000.csv")).unwrap()
    };
    let a = run_once("a");
    let b = run_once("b");
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

// Single desk run: the optimality gap is nonincreasing after the first 10
// iterations in at least 95% of rows.
#[test]
fn desk_run_gap_is_mostly_nonincreasing() {
    let cfg = parse_experiment_config(DESK_CONFIG).unwrap();
    let instance = build_problem(&cfg).unwrap();
    let outcome = run_replicate(&cfg, &instance, 0).unwrap();
    let gaps: Vec<f64> = outcome
        .records
        .iter()
        .skip(10)
        .map(|r| r.opt_gap.unwrap())
        .collect();
    let nonincreasing = gaps.windows(2).filter(|w| w[1] <= w[0]).count();
    let frac = nonincreasing as f64 / (gaps.len() - 1) as f64;
    assert!(
        frac >= 0.95,
        "gap nonincreasing in only {frac:.3} of rows after iteration 10"
    );
}

// The instrumented gradient counter dominates the per-layer cost functional
// on any estimator run; probe evaluations and discarded work explain the
// difference.
#[test]
fn counter_dominates_cost_functional() {
    let problem = CountingProblem::new(quadratic_problem(100.0));
    let cfg = MiceConfig {
        eps: 1.0,
        clipping: ClippingMode::A,
        ..MiceConfig::default()
    };
    let mut rng = RngStream::new(4, 0);
    let outcome = run_sgd_mice(
        &problem,
        &[20.0, 50.0],
        &cfg,
        None,
        &[StoppingRule::MaxIters(400)],
        &RunOptions::default(),
        &mut rng,
    )
    .unwrap();
    let functional = total_sampling_cost(&outcome.records);
    let counter = problem.gradient_calls();
    assert!(counter >= functional, "counter {counter} < functional {functional}");
    // The reported cumulative evaluations equal the instrumented count.
    assert_eq!(outcome.records.last().unwrap().grad_evals_cum, counter);
}

// A restart-only record stream reproduces the restart row of the cost
// functional: one base layer with the restart batch.
#[test]
fn functional_counts_restart_seed_once() {
    let problem = quadratic_problem(100.0);
    let cfg = MiceConfig::default();
    let mut rng = RngStream::new(5, 0);
    let outcome = run_sgd_mice(
        &problem,
        &[20.0, 50.0],
        &cfg,
        None,
        &[StoppingRule::MaxIters(1)],
        &RunOptions::default(),
        &mut rng,
    )
    .unwrap();
    let first = &outcome.records[0];
    let functional = total_sampling_cost(&outcome.records[..1]);
    let expected: u64 = first
        .per_layer
        .iter()
        .map(|l| l.cost_weight as u64 * l.samples)
        .sum();
    assert_eq!(functional, expected);
    assert_eq!(first.grad_evals_cum, expected);
}

// Vanilla SGD with the decreasing schedule converges sublinearly: over the
// same iteration span its log-gap slope per iteration is far shallower than
// the estimator-driven method's linear rate.
#[test]
fn vanilla_sgd_decays_sublinearly() {
    use mice_core::harness::fit_linear_slope;
    use mice_core::optim::{run_vanilla_sgd, StepSchedule};
    use mice_core::problems::StochasticProblem;

    let problem = quadratic_problem(100.0);
    let c = problem.constants().unwrap();
    let iters = 800u64;
    let mut rng = RngStream::new(17, 0);
    let vanilla = run_vanilla_sgd(
        &problem,
        &[20.0, 50.0],
        StepSchedule::InverseLinear {
            eta0: 1.0 / c.lipschitz,
            k0: 50.0,
        },
        10,
        &[StoppingRule::MaxIters(iters)],
        &RunOptions::default(),
        &mut rng,
    )
    .unwrap();
    let mut rng = RngStream::new(17, 1);
    let cfg = MiceConfig {
        eps: 1.0,
        clipping: ClippingMode::A,
        ..MiceConfig::default()
    };
    let mice = run_sgd_mice(
        &problem,
        &[20.0, 50.0],
        &cfg,
        None,
        &[StoppingRule::MaxIters(iters)],
        &RunOptions::default(),
        &mut rng,
    )
    .unwrap();
    let log_gap_slope = |records: &[mice_core::RunRecord]| {
        let pts: Vec<(f64, f64)> = records
            .iter()
            .skip(100)
            .filter_map(|r| r.opt_gap.filter(|g| *g > 0.0).map(|g| (r.iter as f64, g.ln())))
            .collect();
        fit_linear_slope(&pts).unwrap()
    };
    let vanilla_slope = log_gap_slope(&vanilla.records);
    let mice_slope = log_gap_slope(&mice.records);
    assert!(
        mice_slope < 3.0 * vanilla_slope && mice_slope < -1e-3,
        "expected linear decay for the estimator-driven run (got {mice_slope:.5}) to dominate \
         the schedule-driven run (got {vanilla_slope:.5})"
    );
}
