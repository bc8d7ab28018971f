//! End-to-end acceptance suite. Each test prints one PASS/FAIL line with
//! the measured quantities so the whole gate can be audited from the test
//! output:
//!
//! ```text
//! cargo test -p mice-core --test acceptance -- --nocapture --test-threads=1
//! ```

use std::io::Cursor;
use std::time::Instant;

use mice_core::data::{parse_libsvm, LabelPolicy};
use mice_core::estimator::{
    optimal_allocation, restart_cost_from, should_drop, should_restart, AllocationBounds,
    Hierarchy, LayerBudget, LayerKind, WelfordAgg,
};
use mice_core::harness::{
    bootstrap_mean_band, fit_linear_slope, fit_loglog_slope, logistic_reference_optimum,
    theory_rate,
};
use mice_core::optim::{
    reference_step_size, run_adam, run_adam_mice, run_idealized_sgd_mice, run_sarah,
    run_sgd_mice, run_svrg, run_vanilla_sgd, step_size_strongly_convex, AdamParams, RunOptions,
    RunOutcome, StepSchedule, StoppingRule, TableMethod,
};
use mice_core::problems::{
    logistic_problem, quadratic_problem, rosenbrock_problem, shifted_quadratic_problem,
    two_point_quadratic, StochasticProblem,
};
use mice_core::vecops;
use mice_core::{
    mice_iteration, ClippingMode, HierarchyAction, MiceConfig, Population, RngStream, RunRecord,
};

fn verdict(criterion: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {criterion:2} {name}: {status} - {detail}");
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

/// Per-iteration squared distances to the optimum across runs.
fn dist_sq_curves(outcomes: &[RunOutcome], xi_star: &[f64], iters: usize) -> Vec<Vec<f64>> {
    let mut per_iter: Vec<Vec<f64>> = vec![Vec::new(); iters];
    for o in outcomes {
        for r in &o.records {
            if (r.iter as usize) < iters {
                per_iter[r.iter as usize].push(vecops::norm_sq(&vecops::sub(&r.xi, xi_star)));
            }
        }
    }
    per_iter
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn idealized_runs(eps: f64, runs: usize, iters: u64) -> Vec<RunOutcome> {
    let problem = quadratic_problem(10.0);
    let stop = [StoppingRule::MaxIters(iters)];
    let opts = RunOptions::default();
    (0..runs)
        .map(|r| {
            let mut rng = RngStream::new(1000 + r as u64, 1);
            run_idealized_sgd_mice(&problem, &[20.0, 50.0], eps, None, &stop, &opts, &mut rng)
                .unwrap()
        })
        .collect()
}

fn mice_runs(eps: f64, runs: usize, iters: u64) -> Vec<RunOutcome> {
    let problem = quadratic_problem(10.0);
    let stop = [StoppingRule::MaxIters(iters)];
    let opts = RunOptions::default();
    let cfg = MiceConfig {
        eps,
        clipping: ClippingMode::A,
        ..MiceConfig::default()
    };
    (0..runs)
        .map(|r| {
            let mut rng = RngStream::new(5000 + r as u64, 2);
            run_sgd_mice(&problem, &[20.0, 50.0], &cfg, None, &stop, &opts, &mut rng).unwrap()
        })
        .collect()
}

// Criterion 1: the idealized optimizer's fitted per-iteration log
// contraction of mean squared distance matches the theoretical rate within
// 10%, for eps in {0.1, 1.0} at kappa = 10, 200 runs, iterations 5..=40.
#[test]
fn acceptance_01_idealized_l2_rate() {
    let start = Instant::now();
    let problem = quadratic_problem(10.0);
    let (xi_star, _) = problem.optimum().unwrap();
    let mut detail = String::new();
    let mut pass = true;
    for eps in [0.1, 1.0] {
        let outcomes = idealized_runs(eps, 200, 41);
        let curves = dist_sq_curves(&outcomes, &xi_star, 41);
        let pts: Vec<(f64, f64)> = (5..=40)
            .map(|k| (k as f64, mean(&curves[k]).ln()))
            .collect();
        let slope = fit_linear_slope(&pts).unwrap();
        let target = theory_rate(10.0, eps).ln();
        let rel = (slope - target).abs() / target.abs();
        detail.push_str(&format!(
            "eps={eps}: slope={slope:.5} log(rate)={target:.5} rel={rel:.3}; "
        ));
        pass &= rel <= 0.10;
    }
    let elapsed = start.elapsed().as_secs_f64();
    detail.push_str(&format!("runtime={elapsed:.1}s"));
    pass &= elapsed < 60.0;
    verdict(1, "idealized L2 rate", pass, &detail);
}

// Criterion 2: the estimator-driven optimizer's mean-squared-distance curve
// lies within the idealized curve's bootstrap 99% band for >= 80% of
// iterations 5..=40 (same setup as criterion 1, 200 runs each).
//
// Known red. The band of the mean over 200 runs is only a few percent wide,
// and two real effects push the estimator outside it: at eps = 1 the
// fifth-percentile norm resampling and the minimum batch size make the
// realized relative error about half the nominal tolerance, so the method
// runs measurably *better* than its idealization (the curve sits just below
// the band); at eps = 0.1 sample reuse correlates consecutive estimator
// errors and inflates the mean squared distance a few tens of percent even
// though the per-iteration error contract holds. Both causes follow from
// parameters this suite pins elsewhere, so the band test cannot pass
// without breaking those settings. The printed ratios document the margin.
#[test]
fn acceptance_02_mice_matches_idealized_band() {
    let problem = quadratic_problem(10.0);
    let (xi_star, _) = problem.optimum().unwrap();
    let mut detail = String::new();
    let mut pass = true;
    for eps in [0.1, 1.0] {
        let ideal = dist_sq_curves(&idealized_runs(eps, 200, 41), &xi_star, 41);
        let mice = dist_sq_curves(&mice_runs(eps, 200, 41), &xi_star, 41);
        let mut inside = 0;
        let mut ratios = String::new();
        for k in 5..=40usize {
            let mut rng = RngStream::new(0xf00d, k as u64);
            let (lo, hi) = bootstrap_mean_band(&ideal[k], 1000, 0.5, 99.5, &mut rng);
            let m = mean(&mice[k]);
            if m >= lo && m <= hi {
                inside += 1;
            }
            if k % 10 == 0 {
                ratios.push_str(&format!(
                    "k={k}: mice/ideal={:.3} band=[{:.3},{:.3}] ",
                    m / mean(&ideal[k]),
                    lo / mean(&ideal[k]),
                    hi / mean(&ideal[k])
                ));
            }
        }
        detail.push_str(&format!("eps={eps}: inside {inside}/36 (need 29) {ratios}; "));
        pass &= inside >= 29;
    }
    verdict(2, "estimator matches idealized band", pass, &detail);
}

// Criterion 3: relative-error control on the quadratic with kappa = 100 and
// eps = 1: the mean realized relative error (one probe per iteration over 50
// replicate runs, against the analytic gradient) stays below eps in at
// least 85% of 500 iterations.
#[test]
fn acceptance_03_relative_error_control() {
    let problem = quadratic_problem(100.0);
    let cfg = MiceConfig {
        eps: 1.0,
        clipping: ClippingMode::A,
        ..MiceConfig::default()
    };
    let c = problem.constants().unwrap();
    let eta = step_size_strongly_convex(c.lipschitz, c.strong_convexity, cfg.eps).unwrap();
    let replicates = 50;
    let iters = 500usize;
    let mut rel_sum = vec![0.0; iters];
    for rep in 0..replicates {
        let mut rng = RngStream::new(31_000 + rep, 0);
        let mut h = Hierarchy::new(2, problem.population());
        let mut xi = vec![20.0, 50.0];
        for k in 0..iters {
            let report = mice_iteration(&mut h, &problem, &xi, &cfg, &mut rng).unwrap();
            let g = problem.true_gradient(&xi).unwrap();
            rel_sum[k] +=
                vecops::norm(&vecops::sub(&report.gradient, &g)) / vecops::norm(&g);
            vecops::axpy(-eta, &report.gradient, &mut xi);
        }
    }
    let ok = rel_sum
        .iter()
        .filter(|s| **s / replicates as f64 <= cfg.eps)
        .count();
    let frac = ok as f64 / iters as f64;
    verdict(
        3,
        "relative error control",
        frac >= 0.85,
        &format!("mean rel err <= eps in {ok}/{iters} iterations ({frac:.3})"),
    );
}

// Criterion 4: cost-rate slopes on the quadratic with kappa = 100, eps = 1,
// single run: optimality gap vs cumulative evaluations decays at about
// 1/evals and distance at about 1/sqrt(evals) in the asymptotic window
// (after 2e4 evaluations).
#[test]
fn acceptance_04_cost_rate_slopes() {
    let problem = quadratic_problem(100.0);
    let cfg = MiceConfig {
        eps: 1.0,
        clipping: ClippingMode::A,
        ..MiceConfig::default()
    };
    let mut rng = RngStream::new(11, 0);
    let outcome = run_sgd_mice(
        &problem,
        &[20.0, 50.0],
        &cfg,
        None,
        &[StoppingRule::MaxGradEvals(10_000_000)],
        &RunOptions::default(),
        &mut rng,
    )
    .unwrap();
    let (xi_star, _) = problem.optimum().unwrap();
    let window: Vec<&RunRecord> = outcome
        .records
        .iter()
        .filter(|r| r.grad_evals_cum >= 20_000)
        .collect();
    let gap_pts: Vec<(f64, f64)> = window
        .iter()
        .filter_map(|r| r.opt_gap.map(|g| (r.grad_evals_cum as f64, g)))
        .collect();
    let dist_pts: Vec<(f64, f64)> = window
        .iter()
        .map(|r| {
            (
                r.grad_evals_cum as f64,
                vecops::norm(&vecops::sub(&r.xi, &xi_star)),
            )
        })
        .collect();
    let gap_slope = fit_loglog_slope(&gap_pts).unwrap();
    let dist_slope = fit_loglog_slope(&dist_pts).unwrap();
    let pass = (-1.3..=-0.7).contains(&gap_slope) && (-0.65..=-0.35).contains(&dist_slope);
    verdict(
        4,
        "cost-rate slopes",
        pass,
        &format!(
            "gap slope {gap_slope:.3} in [-1.3,-0.7], distance slope {dist_slope:.3} in [-0.65,-0.35] ({} window points)",
            gap_pts.len()
        ),
    );
}

// Criterion 5: the closed-form allocation satisfies the error constraint and
// is within one ceil-rounding unit per layer of the exhaustive integer
// optimum, over 200 random small instances.
#[test]
fn acceptance_05_sample_allocation_oracle() {
    let start = Instant::now();
    let mut rng = RngStream::new(0xa110c, 0);
    let bounds = AllocationBounds {
        m_min: 1,
        max_layer_samples: u64::MAX,
    };
    let mut worst_excess = 0.0f64;
    let mut pass = true;
    for case in 0..200 {
        let layers = 1 + case % 3;
        let target = [0.25, 1.0, 4.0][(case / 3) % 3];
        let budgets: Vec<LayerBudget> = (0..layers)
            .map(|l| LayerBudget {
                variance: 0.5 + 9.5 * rng.unit(),
                cost_weight: if l == 0 { 1.0 } else { 2.0 },
                current: 0,
            })
            .collect();
        let alloc = optimal_allocation(&budgets, Population::Infinite, target, bounds);
        let err: f64 = budgets
            .iter()
            .zip(&alloc)
            .map(|(b, &m)| b.variance / m as f64)
            .sum();
        if err > target * (1.0 + 1e-12) {
            pass = false;
        }
        let cost: f64 = budgets
            .iter()
            .zip(&alloc)
            .map(|(b, &m)| b.cost_weight * m as f64)
            .sum();
        // Exhaustive integer search: the last layer is solved in closed
        // form from the remaining error budget.
        let optimum = brute_force_allocation_cost(&budgets, target);
        let allowance: f64 = budgets.iter().map(|b| b.cost_weight).sum();
        if cost > optimum + allowance + 1e-9 {
            pass = false;
        }
        worst_excess = worst_excess.max(cost - optimum);
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        5,
        "sample allocation oracle",
        pass && elapsed < 10.0,
        &format!("200 instances, worst cost excess {worst_excess:.2} units, runtime {elapsed:.2}s"),
    );
}

fn brute_force_allocation_cost(budgets: &[LayerBudget], target: f64) -> f64 {
    let v_total: f64 = budgets.iter().map(|b| b.variance).sum();
    let cap = (v_total / target).ceil() as u64 + 2;
    let mut best = f64::INFINITY;
    match budgets.len() {
        1 => {
            let m = (budgets[0].variance / target).ceil().max(1.0);
            best = budgets[0].cost_weight * m;
        }
        2 => {
            for m0 in 1..=cap {
                let used = budgets[0].variance / m0 as f64;
                if used >= target {
                    continue;
                }
                let m1 = (budgets[1].variance / (target - used)).ceil().max(1.0);
                best = best.min(budgets[0].cost_weight * m0 as f64 + budgets[1].cost_weight * m1);
            }
        }
        3 => {
            for m0 in 1..=cap {
                let used0 = budgets[0].variance / m0 as f64;
                if used0 >= target {
                    continue;
                }
                let base_cost = budgets[0].cost_weight * m0 as f64;
                if base_cost >= best {
                    break;
                }
                for m1 in 1..=cap {
                    let used1 = used0 + budgets[1].variance / m1 as f64;
                    if used1 >= target {
                        continue;
                    }
                    let m2 = (budgets[2].variance / (target - used1)).ceil().max(1.0);
                    let cost = base_cost
                        + budgets[1].cost_weight * m1 as f64
                        + budgets[2].cost_weight * m2;
                    best = best.min(cost);
                }
            }
        }
        _ => unreachable!(),
    }
    best
}

// Criterion 6: finite-population exactness. With a vanishing tolerance on a
// two-point finite sum, the estimate equals the exact full-population
// gradient, the statistical error is exactly zero, and clipping B freezes
// the saturated prefix.
#[test]
fn acceptance_06_finite_population_exactness() {
    let problem = two_point_quadratic();
    let cfg = MiceConfig {
        eps: 1e-9,
        clipping: ClippingMode::B,
        ..MiceConfig::default()
    };
    let c = problem.constants().unwrap();
    let eta = step_size_strongly_convex(c.lipschitz, c.strong_convexity, 1.0).unwrap();
    let mut h = Hierarchy::new(2, problem.population());
    let mut rng = RngStream::new(6, 0);
    let mut xi = vec![2.0, -1.0];
    let mut max_rel: f64 = 0.0;
    let mut max_err = 0.0f64;
    let mut saw_frozen = false;
    for _ in 0..4 {
        let report = mice_iteration(&mut h, &problem, &xi, &cfg, &mut rng).unwrap();
        let exact = problem.true_gradient(&xi).unwrap();
        let rel = vecops::norm(&vecops::sub(&report.gradient, &exact))
            / vecops::norm(&exact).max(1e-300);
        max_rel = max_rel.max(rel);
        max_err = max_err.max(report.stat_error_sq);
        saw_frozen |= h.layers()[0].kind() == LayerKind::FrozenBase;
        vecops::axpy(-eta, &report.gradient, &mut xi);
    }
    let pass = max_rel <= 1e-10 && max_err == 0.0 && saw_frozen;
    verdict(
        6,
        "finite-population exactness",
        pass,
        &format!("max rel err {max_rel:.2e}, max stat err {max_err:.1e}, frozen base {saw_frozen}"),
    );
}

// Criterion 7: perfectly correlated gradients (shifted quadratic). Every
// intermediate iteration is dropped, non-base layers hold exactly the
// minimum batch, and only the base grows over 100 iterations.
#[test]
fn acceptance_07_shifted_quadratic_degeneracy() {
    let problem = shifted_quadratic_problem(0.1);
    let cfg = MiceConfig::default();
    let c = problem.constants().unwrap();
    let eta = step_size_strongly_convex(c.lipschitz, c.strong_convexity, cfg.eps).unwrap();
    let mut h = Hierarchy::new(2, problem.population());
    let mut rng = RngStream::new(7, 0);
    let mut xi = vec![20.0, 50.0];
    let mut all_dropped = true;
    let mut non_base_at_min = true;
    let mut base_start = 0;
    let mut base_end = 0;
    for k in 0..100u64 {
        let report = mice_iteration(&mut h, &problem, &xi, &cfg, &mut rng).unwrap();
        if k >= 2 && report.action != HierarchyAction::Dropped {
            all_dropped = false;
        }
        for layer in report.per_layer.iter().skip(1) {
            if layer.samples != cfg.m_min {
                non_base_at_min = false;
            }
        }
        let base_m = report.per_layer[0].samples;
        if k == 0 {
            base_start = base_m;
        }
        base_end = base_m;
        vecops::axpy(-eta, &report.gradient, &mut xi);
    }
    let pass = all_dropped && non_base_at_min && base_end > base_start;
    verdict(
        7,
        "shifted-quadratic degeneracy",
        pass,
        &format!(
            "all intermediate dropped {all_dropped}, non-base at m_min {non_base_at_min}, base M {base_start} -> {base_end}"
        ),
    );
}

// Criterion 8: unbiasedness at restart. The initial-iteration estimator at
// a fixed point is conditionally unbiased: over 1e4 independent builds, the
// componentwise sample mean is within 4 standard errors of the analytic
// gradient.
#[test]
fn acceptance_08_unbiasedness_at_restart() {
    let problem = quadratic_problem(100.0);
    let cfg = MiceConfig::default();
    let xi = vec![20.0, 50.0];
    let truth = problem.true_gradient(&xi).unwrap();
    let reps = 10_000u64;
    let mut agg = WelfordAgg::new(2);
    let mut rng = RngStream::new(88, 0);
    for _ in 0..reps {
        let mut h = Hierarchy::new(2, problem.population());
        let report = mice_iteration(&mut h, &problem, &xi, &cfg, &mut rng).unwrap();
        agg.update(&report.gradient);
    }
    let mut pass = true;
    let mut detail = String::new();
    // Componentwise standard errors from the per-component spread; the
    // aggregate tracks the total second moment, so recompute per component.
    let mut comp_welford = [WelfordAgg::new(1), WelfordAgg::new(1)];
    let mut rng = RngStream::new(88, 0);
    for _ in 0..reps {
        let mut h = Hierarchy::new(2, problem.population());
        let report = mice_iteration(&mut h, &problem, &xi, &cfg, &mut rng).unwrap();
        comp_welford[0].update(&report.gradient[0..1]);
        comp_welford[1].update(&report.gradient[1..2]);
    }
    for cidx in 0..2 {
        let m = comp_welford[cidx].mean()[0];
        let se = (comp_welford[cidx].sample_variance_total() / reps as f64).sqrt();
        let dev = (m - truth[cidx]).abs() / se;
        detail.push_str(&format!("component {cidx}: {dev:.2} SE; "));
        pass &= dev <= 4.0;
    }
    verdict(8, "unbiasedness at restart", pass, &detail);
}

// Criterion 9: streaming statistics agree with two-pass computations to
// 1e-12 relative on 1e4 random vectors in any merge order, and jackknife
// complement means equal the direct means of the complements' samples.
#[test]
fn acceptance_09_welford_jackknife_numerics() {
    let mut rng = RngStream::new(9, 0);
    let n = 10_000usize;
    let dim = 3;
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.unit() * 100.0 - 50.0).collect())
        .collect();
    // Single stream and a 7-way partitioned merge in shuffled order.
    let mut single = WelfordAgg::new(dim);
    for s in &samples {
        single.update(s);
    }
    let mut parts = vec![WelfordAgg::new(dim); 7];
    for (i, s) in samples.iter().enumerate() {
        parts[i % 7].update(s);
    }
    let merged = parts[3]
        .merge(&parts[6])
        .merge(&parts[0].merge(&parts[5]))
        .merge(&parts[1])
        .merge(&parts[4].merge(&parts[2]));
    // Two-pass reference.
    let mut ref_mean = vec![0.0; dim];
    for s in &samples {
        for (m, x) in ref_mean.iter_mut().zip(s) {
            *m += x / n as f64;
        }
    }
    let mut ref_m2 = 0.0;
    for s in &samples {
        for (m, x) in ref_mean.iter().zip(s) {
            ref_m2 += (x - m) * (x - m);
        }
    }
    let mut pass = true;
    for agg in [&single, &merged] {
        for c in 0..dim {
            pass &= (agg.mean()[c] - ref_mean[c]).abs()
                <= 1e-12 * ref_mean[c].abs().max(1.0);
        }
        pass &= (agg.m2_total() - ref_m2).abs() <= 1e-12 * ref_m2;
    }
    // Jackknife complement means against direct recomputation.
    let n_part = 5;
    let mut partitions = vec![WelfordAgg::new(dim); n_part];
    for (i, s) in samples.iter().enumerate() {
        partitions[i % n_part].update(s);
    }
    let mut max_dev = 0.0f64;
    for leave in 0..n_part {
        let mut complement = WelfordAgg::new(dim);
        for (p, part) in partitions.iter().enumerate() {
            if p != leave {
                complement = complement.merge(part);
            }
        }
        // Direct mean of the complement's samples.
        let mut direct = vec![0.0; dim];
        let mut count = 0usize;
        for (i, s) in samples.iter().enumerate() {
            if i % n_part != leave {
                count += 1;
                for (m, x) in direct.iter_mut().zip(s) {
                    *m += x;
                }
            }
        }
        for m in direct.iter_mut() {
            *m /= count as f64;
        }
        for c in 0..dim {
            max_dev = max_dev.max(
                (complement.mean()[c] - direct[c]).abs() / direct[c].abs().max(1.0),
            );
        }
    }
    pass &= max_dev <= 1e-12;
    verdict(
        9,
        "streaming statistics numerics",
        pass,
        &format!("two-pass and jackknife deviations <= 1e-12 (worst jackknife {max_dev:.1e})"),
    );
}

/// Synthetic stand-in for the mushrooms dataset (the real file is not
/// bundled): 8124 rows, 112 features as 22 one-hot categorical groups,
/// strongly but not perfectly separable, Table-1 regularization.
fn synthetic_mushrooms_text() -> String {
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
            let signal = if g % 3 == 0 { 0.75 } else { 0.45 };
            let u = rng.unit();
            let pick = if size >= 2 {
                if y > 0 {
                    if u < signal {
                        0
                    } else {
                        1 + rng.index(size - 1)
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

// Criterion 10: logistic desk run at mushrooms scale. The estimator-driven
// SGD (eps = 0.5, clipping B, lambda = 1e-5) reaches a relative optimality
// gap of 1e-3 with fewer gradient evaluations than decreasing-step SGD and
// within 2x the best of SVRG/SARAH.
#[test]
fn acceptance_10_logistic_desk_run() {
    let start = Instant::now();
    let dataset = parse_libsvm(Cursor::new(synthetic_mushrooms_text()), LabelPolicy::Strict)
        .unwrap();
    assert_eq!((dataset.len(), dataset.num_features()), (8124, 112));
    let problem = logistic_problem(dataset, 1e-5);
    let c = problem.constants().unwrap();
    let (_, f_star) = logistic_reference_optimum(&problem);
    let xi0 = vec![0.0; 112];
    let gap0 = problem.true_objective(&xi0).unwrap() - f_star;
    let target = f_star + 1e-3 * gap0;
    let budget = 4_000_000u64;
    let stop = [StoppingRule::MaxGradEvals(budget)];
    let evals_at_target = |records: &[RunRecord]| -> Option<u64> {
        records
            .iter()
            .find(|r| r.objective.map(|o| o <= target).unwrap_or(false))
            .map(|r| r.grad_evals_cum)
    };

    let mice_cfg = MiceConfig {
        eps: 0.5,
        clipping: ClippingMode::B,
        // Resampling a 112-dimensional layer costs about one gradient
        // evaluation here, not the cheap-default 0.01.
        cost_ratio_samp: 1.0,
        ..MiceConfig::default()
    };
    let mice_opts = RunOptions {
        record_every: 50,
        reference_objective: Some(f_star),
        wall_time: false,
    };
    let mice = run_sgd_mice(
        &problem,
        &xi0,
        &mice_cfg,
        None,
        &stop,
        &mice_opts,
        &mut RngStream::new(10, 0),
    )
    .unwrap();
    let mice_evals = evals_at_target(&mice.records);

    let baseline_opts = RunOptions {
        record_every: 2000,
        reference_objective: Some(f_star),
        wall_time: false,
    };
    let table_step = reference_step_size(
        TableMethod::Svrg,
        c.lipschitz_as.unwrap(),
        c.strong_convexity,
        8124,
    );
    let svrg = run_svrg(
        &problem,
        &xi0,
        table_step,
        &stop,
        &baseline_opts,
        &mut RngStream::new(11, 0),
    )
    .unwrap();
    let sarah = run_sarah(
        &problem,
        &xi0,
        table_step,
        &stop,
        &baseline_opts,
        &mut RngStream::new(12, 0),
    )
    .unwrap();
    let sgd = run_vanilla_sgd(
        &problem,
        &xi0,
        StepSchedule::InverseLinear {
            eta0: 1.0 / c.lipschitz,
            k0: 50.0,
        },
        10,
        &stop,
        &baseline_opts,
        &mut RngStream::new(13, 0),
    )
    .unwrap();
    let svrg_evals = evals_at_target(&svrg.records);
    let sarah_evals = evals_at_target(&sarah.records);
    let sgd_evals = evals_at_target(&sgd.records);

    let elapsed = start.elapsed().as_secs_f64();
    let mice_at = mice_evals.unwrap_or(u64::MAX);
    let beats_sgd = mice_at < sgd_evals.unwrap_or(u64::MAX);
    let best_vr = svrg_evals
        .unwrap_or(u64::MAX)
        .min(sarah_evals.unwrap_or(u64::MAX));
    let within_2x = best_vr == u64::MAX || mice_at <= best_vr.saturating_mul(2);
    let pass = mice_evals.is_some() && beats_sgd && within_2x && elapsed < 300.0;
    verdict(
        10,
        "logistic desk run ordering",
        pass,
        &format!(
            "evals to 1e-3 rel gap: mice {mice_evals:?}, svrg {svrg_evals:?}, sarah {sarah_evals:?}, sgd {sgd_evals:?}; runtime {elapsed:.0}s"
        ),
    );
}

// Criterion 11: stochastic Rosenbrock stability. Over 10 seeds with a 1e6
// evaluation budget, the estimator-driven Adam's final 20% of
// optimality-gap samples have lower median and lower interquartile range
// than plain Adam (batch 100, step 0.02/sqrt(k)).
#[test]
fn acceptance_11_rosenbrock_stability() {
    let problem = rosenbrock_problem(0.1);
    let stop = [StoppingRule::MaxGradEvals(1_000_000)];
    let final_fifth = |records: &[RunRecord]| -> Vec<f64> {
        let start = records.len() - records.len() / 5;
        records[start..].iter().filter_map(|r| r.opt_gap).collect()
    };
    let median_iqr = |mut v: Vec<f64>| -> (f64, f64) {
        v.sort_by(|a, b| a.total_cmp(b));
        let q = |p: f64| v[((v.len() - 1) as f64 * p) as usize];
        (q(0.5), q(0.75) - q(0.25))
    };
    let mut mice_gaps = Vec::new();
    let mut adam_gaps = Vec::new();
    for seed in 0..10u64 {
        let cfg = MiceConfig {
            eps: 0.7,
            clipping: ClippingMode::A,
            ..MiceConfig::default()
        };
        let outcome = run_adam_mice(
            &problem,
            &[-1.0, 1.0],
            &cfg,
            0.2,
            AdamParams::default(),
            &stop,
            &RunOptions::default(),
            &mut RngStream::new(777 + seed, 0),
        )
        .unwrap();
        mice_gaps.extend(final_fifth(&outcome.records));
        let outcome = run_adam(
            &problem,
            &[-1.0, 1.0],
            StepSchedule::InverseSqrt { eta0: 0.02 },
            100,
            AdamParams::default(),
            &stop,
            &RunOptions::default(),
            &mut RngStream::new(888 + seed, 0),
        )
        .unwrap();
        adam_gaps.extend(final_fifth(&outcome.records));
    }
    let (m_med, m_iqr) = median_iqr(mice_gaps);
    let (a_med, a_iqr) = median_iqr(adam_gaps);
    let pass = m_med < a_med && m_iqr < a_iqr;
    verdict(
        11,
        "rosenbrock stability",
        pass,
        &format!(
            "median: mice {m_med:.2e} vs adam {a_med:.2e}; iqr: mice {m_iqr:.2e} vs adam {a_iqr:.2e}"
        ),
    );
}

// Criterion 12: decision-rule truth tables, exactly as stated.
#[test]
fn acceptance_12_decision_rule_truth_tables() {
    let mut pass = true;

    // should_drop
    pass &= should_drop(4.0, 1.0, 1.0, 0.5);
    pass &= !should_drop(9.0, 1.0, 1.0, 0.5);
    pass &= should_drop(4.0, 1.0, 1.0, 0.0);

    // should_restart
    pass &= should_restart(100.0, 200.0, 0.0);
    pass &= !should_restart(300.0, 200.0, 0.3);
    pass &= should_restart(260.0, 200.0, 0.3);

    // restart_cost
    pass &= restart_cost_from(100.0, 1.0, 1) == 100.0;
    pass &= restart_cost_from(0.0, 1.0, 50) == 50.0;
    pass &= restart_cost_from(10.0, 4.0, 50) == 50.0;

    // step_size_strongly_convex
    pass &= step_size_strongly_convex(1.0, 1.0, 0.0).unwrap() == 1.0;
    pass &= (step_size_strongly_convex(100.0, 1.0, 1.0).unwrap() - 1.0 / 101.0).abs() < 1e-18;
    let contraction = (theory_rate(100.0, 1.0) - 10001.0 / 10201.0).abs();
    pass &= contraction < 1e-15;

    // stat_error_sq via hierarchies
    {
        use mice_core::LayerStats;
        let mut h = Hierarchy::new(1, Population::Infinite);
        let mut base = mice_core::LayerStats::raw_base(0, 1, 5, Population::Infinite);
        base.push_sample(&[2.0]);
        base.push_sample(&[-2.0]);
        // V = 8, M = 2 -> 4; scale to the spec row (V=4, M=2 -> 2) via
        // samples +/- sqrt(2).
        let s = 2.0f64.sqrt();
        let mut base2 = LayerStats::raw_base(0, 1, 5, Population::Infinite);
        base2.push_sample(&[s]);
        base2.push_sample(&[-s]);
        h.push_layer(base2);
        pass &= (h.stat_error_sq() - 2.0).abs() < 1e-12;
        let _ = base;

        // Finite population: full sampling zeroes the error.
        let mut hf = Hierarchy::new(1, Population::Finite(100));
        let mut basef = LayerStats::raw_base(0, 1, 5, Population::Finite(100));
        for i in 0..100 {
            basef.push_sample(&[if i % 2 == 0 { 2.0 } else { -2.0 }]);
        }
        hf.push_layer(basef);
        pass &= hf.stat_error_sq() == 0.0;
    }

    // optimal_sample_sizes rows
    let bounds = AllocationBounds {
        m_min: 1,
        max_layer_samples: u64::MAX,
    };
    let single = [LayerBudget {
        variance: 4.0,
        cost_weight: 1.0,
        current: 0,
    }];
    pass &= optimal_allocation(&single, Population::Infinite, 1.0, bounds) == vec![4];
    let pair = [
        LayerBudget {
            variance: 9.0,
            cost_weight: 1.0,
            current: 0,
        },
        LayerBudget {
            variance: 1.0,
            cost_weight: 2.0,
            current: 0,
        },
    ];
    pass &= optimal_allocation(&pair, Population::Infinite, 1.0, bounds) == vec![14, 4];
    pass &= optimal_allocation(&single, Population::Finite(100), 0.0, bounds) == vec![100];

    verdict(12, "decision-rule truth tables", pass, "all example rows hold exactly");
}
