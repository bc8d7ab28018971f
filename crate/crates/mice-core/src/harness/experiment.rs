//! Experiment orchestration: problem construction, reference optima,
//! replicate execution on a bounded worker pool, and aggregation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{ExperimentConfig, MethodSpec, ProblemSpec, ScheduleKind};
use super::stats::bootstrap_mean_band;
use super::HarnessError;
use crate::data::{parse_libsvm, subsample};
use crate::optim::{
    reference_step_size, run_adam, run_adam_mice, run_idealized_sgd_mice, run_sag, run_saga,
    run_sarah, run_sgd_a, run_sgd_mice, run_svrg, run_vanilla_sgd, AdamParams, RunOptions,
    RunOutcome, StepSchedule, StoppingRule,
};
use crate::problems::{logistic_problem, LogisticProblem, StochasticProblem};
use crate::rng::RngStream;
use crate::telemetry::{write_run_csv, RunRecord};
use crate::vecops;

/// A fully built problem instance plus everything the runners need around
/// it.
pub struct ProblemInstance {
    pub problem: Box<dyn StochasticProblem + Send + Sync>,
    pub xi0: Vec<f64>,
    /// Reference optimal value for optimality gaps.
    pub f_star: Option<f64>,
    /// Reference optimal point, when known.
    pub xi_star: Option<Vec<f64>>,
}

/// Newton iteration to machine precision for the logistic reference
/// optimum. Dense Hessian, so reserved for moderate dimension; larger
/// problems fall back to plain gradient descent with a loose tolerance.
pub fn logistic_reference_optimum(problem: &LogisticProblem) -> (Vec<f64>, f64) {
    let d = problem.dim();
    let n = problem.dataset().len();
    let lambda = problem.lambda();
    let mut xi = vec![0.0; d];
    if d <= 2000 {
        for _ in 0..200 {
            let grad = problem.true_gradient(&xi).unwrap();
            if vecops::norm(&grad) <= 1e-12 {
                break;
            }
            let mut hess = vec![vec![0.0; d]; d];
            for (row, h) in hess.iter_mut().enumerate() {
                h[row] = lambda;
            }
            for i in 0..n {
                let row = problem.dataset().row(i);
                let mut z = 0.0;
                for &(j, x) in row {
                    z += x * xi[j];
                }
                let margin = problem.dataset().label(i) * z;
                let s = 1.0 / (1.0 + margin.exp());
                let w = s * (1.0 - s) / n as f64;
                for &(a, xa) in row {
                    for &(b, xb) in row {
                        hess[a][b] += w * xa * xb;
                    }
                }
            }
            match vecops::spd_solve(&hess, &grad) {
                Ok(step) => {
                    for (x, s) in xi.iter_mut().zip(&step) {
                        *x -= s;
                    }
                }
                Err(_) => break,
            }
        }
    } else {
        let c = problem.constants().unwrap();
        let eta = 1.0 / c.lipschitz;
        for _ in 0..200_000 {
            let grad = problem.true_gradient(&xi).unwrap();
            if vecops::norm(&grad) <= 1e-9 {
                break;
            }
            vecops::axpy(-eta, &grad, &mut xi);
        }
    }
    let f = problem.true_objective(&xi).unwrap();
    (xi, f)
}

fn cached_logistic_reference(
    problem: &LogisticProblem,
    dataset_path: &Path,
) -> Result<(Vec<f64>, f64), HarnessError> {
    let cache = dataset_path.with_extension(format!(
        "ref-{:e}-{}.txt",
        problem.lambda(),
        problem.dataset().len()
    ));
    if let Ok(text) = fs::read_to_string(&cache) {
        let mut lines = text.lines();
        if let Some(f_line) = lines.next() {
            if let Ok(f_star) = f_line.trim().parse::<f64>() {
                let xi: Result<Vec<f64>, _> =
                    lines.map(|l| l.trim().parse::<f64>()).collect();
                if let Ok(xi) = xi {
                    if xi.len() == problem.dim() {
                        return Ok((xi, f_star));
                    }
                }
            }
        }
    }
    let (xi, f_star) = logistic_reference_optimum(problem);
    let mut text = format!("{f_star}\n");
    for x in &xi {
        text.push_str(&format!("{x}\n"));
    }
    // Cache write failures are not fatal; the value was computed.
    let _ = fs::write(&cache, text);
    Ok((xi, f_star))
}

/// Build the problem named by the config, including its reference optimum.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<ProblemInstance, HarnessError> {
    match &cfg.problem {
        ProblemSpec::Quadratic { kappa } => {
            let p = crate::problems::quadratic_problem(*kappa);
            let (xi_star, f_star) = p.optimum().unwrap();
            Ok(ProblemInstance {
                xi0: cfg.xi0.clone().unwrap_or_else(|| vec![20.0, 50.0]),
                f_star: Some(f_star),
                xi_star: Some(xi_star),
                problem: Box::new(p),
            })
        }
        ProblemSpec::ShiftedQuadratic { sigma } => {
            let p = crate::problems::shifted_quadratic_problem(*sigma);
            let (xi_star, f_star) = p.optimum().unwrap();
            Ok(ProblemInstance {
                xi0: cfg.xi0.clone().unwrap_or_else(|| vec![20.0, 50.0]),
                f_star: Some(f_star),
                xi_star: Some(xi_star),
                problem: Box::new(p),
            })
        }
        ProblemSpec::Rosenbrock { sigma } => {
            let p = crate::problems::rosenbrock_problem(*sigma);
            let (xi_star, f_star) = p.optimum().unwrap();
            Ok(ProblemInstance {
                xi0: cfg.xi0.clone().unwrap_or_else(|| vec![-1.0, 1.0]),
                f_star: Some(f_star),
                xi_star: Some(xi_star),
                problem: Box::new(p),
            })
        }
        ProblemSpec::Logistic {
            dataset,
            lambda,
            labels,
            subsample: sub,
        } => {
            let file = fs::File::open(dataset).map_err(|e| {
                HarnessError::Config(format!("cannot open dataset {}: {e}", dataset.display()))
            })?;
            let mut data = parse_libsvm(std::io::BufReader::new(file), *labels)
                .map_err(|e| HarnessError::Config(format!("dataset parse: {e}")))?;
            if let Some(n) = sub {
                let mut rng = RngStream::new(cfg.seed, u64::MAX);
                data = subsample(&data, *n, &mut rng)
                    .map_err(|e| HarnessError::Config(format!("subsample: {e}")))?;
            }
            let p = logistic_problem(data, *lambda);
            let (xi_star, f_star) = cached_logistic_reference(&p, dataset)?;
            let d = p.dim();
            Ok(ProblemInstance {
                xi0: cfg.xi0.clone().unwrap_or_else(|| vec![0.0; d]),
                f_star: Some(f_star),
                xi_star: Some(xi_star),
                problem: Box::new(p),
            })
        }
    }
}

fn stopping_rules(cfg: &ExperimentConfig, mu: Option<f64>) -> Vec<StoppingRule> {
    let mut rules = Vec::new();
    if let Some(k) = cfg.stop.max_iters {
        rules.push(StoppingRule::MaxIters(k));
    }
    if let Some(b) = cfg.stop.max_grad_evals {
        rules.push(StoppingRule::MaxGradEvals(b));
    }
    if let Some(tol) = cfg.stop.grad_tol {
        rules.push(StoppingRule::GradNorm {
            mu: mu.unwrap_or(1.0),
            tol,
        });
    }
    rules
}

/// Execute one replicate with its own derived random stream.
pub fn run_replicate(
    cfg: &ExperimentConfig,
    instance: &ProblemInstance,
    replicate: u64,
) -> Result<RunOutcome, HarnessError> {
    let problem: &dyn StochasticProblem = &*instance.problem;
    let constants = problem.constants();
    let rules = stopping_rules(cfg, constants.map(|c| c.strong_convexity));
    let opts = RunOptions {
        record_every: cfg.record_every,
        reference_objective: instance.f_star,
        wall_time: cfg.timings,
    };
    let mut rng = RngStream::new(cfg.seed, replicate);
    let outcome = match &cfg.method {
        MethodSpec::SgdMice { step } => run_sgd_mice(
            &problem, &instance.xi0, &cfg.mice, *step, &rules, &opts, &mut rng,
        )?,
        MethodSpec::AdamMice { step } => run_adam_mice(
            &problem,
            &instance.xi0,
            &cfg.mice,
            *step,
            AdamParams::default(),
            &rules,
            &opts,
            &mut rng,
        )?,
        MethodSpec::IdealizedSgdMice { eps, step } => run_idealized_sgd_mice(
            &problem, &instance.xi0, *eps, *step, &rules, &opts, &mut rng,
        )?,
        MethodSpec::VanillaSgd {
            schedule,
            step,
            batch,
        } => {
            let schedule = match schedule {
                ScheduleKind::Constant => StepSchedule::Constant(step.ok_or_else(|| {
                    HarnessError::Config("constant schedule requires method.step".into())
                })?),
                ScheduleKind::Decreasing => {
                    let lipschitz = constants
                        .map(|c| c.lipschitz)
                        .ok_or(HarnessError::Config(
                            "decreasing schedule needs problem constants".into(),
                        ))?;
                    StepSchedule::InverseLinear {
                        eta0: step.unwrap_or(1.0 / lipschitz),
                        k0: 50.0,
                    }
                }
                ScheduleKind::InverseSqrt => StepSchedule::InverseSqrt {
                    eta0: step.unwrap_or(0.02),
                },
            };
            run_vanilla_sgd(
                &problem, &instance.xi0, schedule, *batch, &rules, &opts, &mut rng,
            )?
        }
        MethodSpec::SgdA { step } => run_sgd_a(
            &problem, &instance.xi0, &cfg.mice, *step, &rules, &opts, &mut rng,
        )?,
        MethodSpec::Adam {
            schedule,
            step,
            batch,
        } => {
            let schedule = match schedule {
                ScheduleKind::Constant => StepSchedule::Constant(*step),
                ScheduleKind::InverseSqrt => StepSchedule::InverseSqrt { eta0: *step },
                ScheduleKind::Decreasing => StepSchedule::InverseLinear {
                    eta0: *step,
                    k0: 50.0,
                },
            };
            run_adam(
                &problem,
                &instance.xi0,
                schedule,
                *batch,
                AdamParams::default(),
                &rules,
                &opts,
                &mut rng,
            )?
        }
        MethodSpec::Table { method, step } => {
            let step = match step {
                Some(s) => *s,
                None => {
                    let c = constants.ok_or(HarnessError::Config(
                        "table method needs problem constants or method.step".into(),
                    ))?;
                    let l_as = c.lipschitz_as.ok_or(HarnessError::Config(
                        "table method needs a per-sample Lipschitz bound".into(),
                    ))?;
                    let n = match problem.population() {
                        crate::problems::Population::Finite(n) => n,
                        _ => {
                            return Err(HarnessError::Config(
                                "table method requires a finite population".into(),
                            ))
                        }
                    };
                    reference_step_size(*method, l_as, c.strong_convexity, n)
                }
            };
            match method {
                crate::optim::TableMethod::Sag => {
                    run_sag(&problem, &instance.xi0, step, &rules, &opts, &mut rng)?
                }
                crate::optim::TableMethod::Saga => {
                    run_saga(&problem, &instance.xi0, step, &rules, &opts, &mut rng)?
                }
                crate::optim::TableMethod::Sarah => {
                    run_sarah(&problem, &instance.xi0, step, &rules, &opts, &mut rng)?
                }
                crate::optim::TableMethod::Svrg => {
                    run_svrg(&problem, &instance.xi0, step, &rules, &opts, &mut rng)?
                }
            }
        }
    };
    Ok(outcome)
}

/// Run all replicates on a bounded worker pool. Outputs are deterministic
/// per replicate regardless of scheduling.
pub fn run_replicates(
    cfg: &ExperimentConfig,
    instance: &ProblemInstance,
) -> Result<Vec<RunOutcome>, HarnessError> {
    let n = cfg.replicates as usize;
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(n)
        .max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunOutcome, HarnessError>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = run_replicate(cfg, instance, i as u64);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("replicate executed"))
        .collect()
}

/// One aggregate row per iteration index: replicate count, mean optimality
/// gap with a bootstrap band of the mean, and mean cumulative evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub iter: u64,
    pub n: u64,
    pub opt_gap_mean: f64,
    pub opt_gap_p01: f64,
    pub opt_gap_p99: f64,
    pub grad_evals_mean: f64,
}

pub const AGGREGATE_HEADER: &str =
    "iter,n,opt_gap_mean,opt_gap_p01,opt_gap_p99,grad_evals_mean";

const BOOTSTRAP_REPS: u32 = 400;
const BOOTSTRAP_SEED: u64 = 0x00a6_6e7a;

/// Pure function of the per-replicate records (fixed internal bootstrap
/// seed), so aggregates are reproducible from the CSVs alone.
pub fn aggregate_records(per_replicate: &[Vec<RunRecord>]) -> Vec<AggregateRow> {
    let max_len = per_replicate.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut rows = Vec::new();
    for idx in 0..max_len {
        let mut gaps = Vec::new();
        let mut evals = Vec::new();
        let mut iter = None;
        for records in per_replicate {
            if let Some(r) = records.get(idx) {
                iter.get_or_insert(r.iter);
                if let Some(g) = r.opt_gap {
                    gaps.push(g);
                }
                evals.push(r.grad_evals_cum as f64);
            }
        }
        if gaps.is_empty() {
            continue;
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let mut rng = RngStream::new(BOOTSTRAP_SEED, idx as u64);
        let (lo, hi) = bootstrap_mean_band(&gaps, BOOTSTRAP_REPS, 1.0, 99.0, &mut rng);
        rows.push(AggregateRow {
            iter: iter.unwrap_or(idx as u64),
            n: gaps.len() as u64,
            opt_gap_mean: mean,
            opt_gap_p01: lo,
            opt_gap_p99: hi,
            grad_evals_mean: evals.iter().sum::<f64>() / evals.len() as f64,
        });
    }
    rows
}

pub fn write_aggregate_csv<W: Write>(
    rows: &[AggregateRow],
    sink: &mut W,
) -> Result<(), HarnessError> {
    writeln!(sink, "{AGGREGATE_HEADER}")?;
    for r in rows {
        writeln!(
            sink,
            "{},{},{},{},{},{}",
            r.iter, r.n, r.opt_gap_mean, r.opt_gap_p01, r.opt_gap_p99, r.grad_evals_mean
        )?;
    }
    Ok(())
}

/// Minimal SVG line chart of optimality gap against cumulative gradient
/// evaluations, log-log. Plot-ready data stays in the CSVs; this is a
/// convenience view.
pub fn render_gap_svg(records: &[RunRecord]) -> String {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| {
            r.opt_gap.and_then(|g| {
                (g > 0.0 && r.grad_evals_cum > 0).then(|| (r.grad_evals_cum as f64, g))
            })
        })
        .collect();
    let (w, h) = (640.0, 420.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    if points.len() >= 2 {
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in &points {
            x0 = x0.min(x.ln());
            x1 = x1.max(x.ln());
            y0 = y0.min(y.ln());
            y1 = y1.max(y.ln());
        }
        let sx = |x: f64| 40.0 + (x.ln() - x0) / (x1 - x0).max(1e-12) * (w - 60.0);
        let sy = |y: f64| (h - 30.0) - (y.ln() - y0) / (y1 - y0).max(1e-12) * (h - 50.0);
        let path: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug)]
pub struct ExperimentSummary {
    pub replicate_files: Vec<PathBuf>,
    pub aggregate_file: Option<PathBuf>,
    pub final_gap: Option<f64>,
    pub total_grad_evals: u64,
}

/// Run the full experiment: replicates, per-replicate CSVs, aggregate, and
/// optional SVG.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    let instance = build_problem(cfg)?;
    let outcomes = run_replicates(cfg, &instance)?;
    let mut replicate_files = Vec::new();
    let mut aggregate_file = None;
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        for (i, outcome) in outcomes.iter().enumerate() {
            let path = dir.join(format!("rep_{i:03}.csv"));
            let mut file = fs::File::create(&path)?;
            write_run_csv(outcome.records.iter(), &mut file)?;
            replicate_files.push(path);
        }
        let per_replicate: Vec<Vec<RunRecord>> =
            outcomes.iter().map(|o| o.records.clone()).collect();
        let rows = aggregate_records(&per_replicate);
        let path = dir.join("aggregate.csv");
        let mut file = fs::File::create(&path)?;
        write_aggregate_csv(&rows, &mut file)?;
        aggregate_file = Some(path);
        if cfg.svg {
            let svg = render_gap_svg(&outcomes[0].records);
            fs::write(dir.join("opt_gap.svg"), svg)?;
        }
    }
    let final_gap = outcomes
        .iter()
        .filter_map(|o| o.final_record().and_then(|r| r.opt_gap))
        .fold(None, |acc: Option<f64>, g| {
            Some(acc.map_or(g, |a| a + g))
        })
        .map(|sum| sum / outcomes.len() as f64);
    let total_grad_evals = outcomes
        .iter()
        .filter_map(|o| o.final_record().map(|r| r.grad_evals_cum))
        .sum();
    Ok(ExperimentSummary {
        replicate_files,
        aggregate_file,
        final_gap,
        total_grad_evals,
    })
}
