use std::io::Cursor;

use mice_core::data::{parse_libsvm, LabelPolicy};
use mice_core::optim::{
    reference_step_size, run_sarah, run_sgd_mice, run_svrg, run_vanilla_sgd, RunOptions,
    StepSchedule, StoppingRule, TableMethod,
};
use mice_core::problems::{logistic_problem, StochasticProblem};
use mice_core::{ClippingMode, MiceConfig, RngStream};

/// Synthetic stand-in for the mushrooms dataset: 8124 rows, 112 features as
/// 22 one-hot categorical groups, strongly (not perfectly) separable.
fn synthetic_mushrooms() -> String {
    let n = 8124;
    let groups = 22;
    let d = 112;
    let mut sizes = vec![d / groups; groups];
    let rem = d - sizes.iter().sum::<usize>();
    for s in sizes.iter_mut().take(rem) {
        *s += 1;
    }
    let mut starts = Vec::new();
    let mut acc = 0;
    for s in &sizes {
        starts.push(acc);
        acc += s;
    }
    let mut rng = RngStream::new(0x6d75_7368, 0);
    let mut text = String::new();
    for row in 0..n {
        let y = if row % 2 == 0 { 1 } else { -1 };
        text.push_str(if y > 0 { "1" } else { "-1" });
        for g in 0..groups {
            let size = sizes[g];
            // Feature 0 of the group leans positive, feature 1 negative,
            // the rest neutral. Signal strength varies by group.
            let signal = if g % 3 == 0 { 0.75 } else { 0.45 };
            let u = rng.unit();
            let pick = if size >= 2 {
                if y > 0 {
                    if u < signal {
                        0
                    } else {
                        1 + (rng.index(size - 1))
                    }
                } else if u < signal {
                    1
                } else {
                    let c = rng.index(size - 1);
                    if c == 0 {
                        0
                    } else {
                        c + 1
                    }
                }
            } else {
                0
            };
            let feat = starts[g] + pick.min(size - 1);
            text.push_str(&format!(" {}:1", feat + 1));
        }
        text.push('\n');
    }
    text
}

#[test]
#[ignore]
fn diag_logistic_ordering() {
    let text = synthetic_mushrooms();
    let dataset = parse_libsvm(Cursor::new(text), LabelPolicy::Strict).unwrap();
    assert_eq!(dataset.len(), 8124);
    assert_eq!(dataset.num_features(), 112);
    let problem = logistic_problem(dataset, 1e-5);
    let c = problem.constants().unwrap();
    println!(
        "L={} mu={} L_as={} kappa={:.1e}",
        c.lipschitz,
        c.strong_convexity,
        c.lipschitz_as.unwrap(),
        c.condition_number()
    );
    let t0 = std::time::Instant::now();
    let (_, f_star) = mice_core::harness::logistic_reference_optimum(&problem);
    let f0 = problem.true_objective(&vec![0.0; 112]).unwrap();
    println!("f0={f0} f*={f_star} gap0={} ({:?})", f0 - f_star, t0.elapsed());
    let gap0 = f0 - f_star;
    let target = f_star + 1e-3 * gap0;

    let evals_to_target = |records: &[mice_core::RunRecord]| -> Option<u64> {
        records
            .iter()
            .find(|r| r.objective.is_some() && r.objective.unwrap() <= target)
            .map(|r| r.grad_evals_cum)
    };

    let opts = RunOptions {
        record_every: 2000,
        reference_objective: Some(f_star),
        wall_time: false,
    };
    let budget = 4_000_000u64;

    // SGD-MICE
    let t = std::time::Instant::now();
    let cfg = MiceConfig {
        eps: 0.5,
        clipping: ClippingMode::B,
        cost_ratio_samp: 1.0,
        ..MiceConfig::default()
    };
    let mice_opts = RunOptions {
        record_every: 50,
        ..opts.clone()
    };
    let outcome = run_sgd_mice(
        &problem,
        &vec![0.0; 112],
        &cfg,
        None,
        &[StoppingRule::MaxGradEvals(budget)],
        &mice_opts,
        &mut RngStream::new(10, 0),
    )
    .unwrap();
    println!(
        "sgd-mice: iters={} evals_at_target={:?} final_gap={:.3e} time={:?}",
        outcome.records.len(),
        evals_to_target(&outcome.records),
        outcome.records.last().unwrap().objective.unwrap() - f_star,
        t.elapsed()
    );

    // SVRG
    let t = std::time::Instant::now();
    let step = reference_step_size(
        TableMethod::Svrg,
        c.lipschitz_as.unwrap(),
        c.strong_convexity,
        8124,
    );
    let outcome = run_svrg(
        &problem,
        &vec![0.0; 112],
        step,
        &[StoppingRule::MaxGradEvals(budget)],
        &opts,
        &mut RngStream::new(11, 0),
    )
    .unwrap();
    println!(
        "svrg: step={step:.4} evals_at_target={:?} final_gap={:.3e} time={:?}",
        evals_to_target(&outcome.records),
        outcome.records.last().unwrap().objective.unwrap() - f_star,
        t.elapsed()
    );

    // SARAH
    let t = std::time::Instant::now();
    let outcome = run_sarah(
        &problem,
        &vec![0.0; 112],
        step,
        &[StoppingRule::MaxGradEvals(budget)],
        &opts,
        &mut RngStream::new(12, 0),
    )
    .unwrap();
    println!(
        "sarah: evals_at_target={:?} final_gap={:.3e} time={:?}",
        evals_to_target(&outcome.records),
        outcome.records.last().unwrap().objective.unwrap() - f_star,
        t.elapsed()
    );

    // Vanilla SGD, paper schedule, batch 10
    let t = std::time::Instant::now();
    let outcome = run_vanilla_sgd(
        &problem,
        &vec![0.0; 112],
        StepSchedule::InverseLinear {
            eta0: 1.0 / c.lipschitz,
            k0: 50.0,
        },
        10,
        &[StoppingRule::MaxGradEvals(budget)],
        &opts,
        &mut RngStream::new(13, 0),
    )
    .unwrap();
    println!(
        "sgd: evals_at_target={:?} final_gap={:.3e} time={:?}",
        evals_to_target(&outcome.records),
        outcome.records.last().unwrap().objective.unwrap() - f_star,
        t.elapsed()
    );
}
