//! Baseline stochastic gradient methods: plain minibatch SGD with a step
//! schedule, and SGD with adaptively grown batches under the same relative
//! error control as the estimator (no control variates).

use super::{
    batch_gradient, step_size_strongly_convex, stopped, OptimError, Recorder, RunOptions,
    RunOutcome, StepSchedule, StoppingRule, Termination,
};
use crate::estimator::{mice_iteration, Hierarchy, MiceConfig, MiceError};
use crate::problems::StochasticProblem;
use crate::rng::RngStream;
use crate::vecops;

/// Plain Monte Carlo minibatch SGD.
pub fn run_vanilla_sgd<P: StochasticProblem>(
    problem: &P,
    xi0: &[f64],
    schedule: StepSchedule,
    batch: u64,
    stop: &[StoppingRule],
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<RunOutcome, OptimError> {
    if batch == 0 {
        return Err(OptimError::InvalidParameter("batch must be positive".into()));
    }
    let recorder = Recorder::new(problem, opts);
    let mut xi = xi0.to_vec();
    let mut evals = 0u64;
    let mut records = Vec::new();
    let mut iter = 0u64;
    loop {
        let (gradient, spent) = batch_gradient(problem, &xi, batch, rng);
        evals += spent;
        let grad_norm = vecops::norm(&gradient);
        if iter % opts.record_every == 0 {
            records.push(recorder.record(problem, iter, evals, &xi, grad_norm));
        }
        if let Some(t) = stopped(stop, iter + 1, evals, grad_norm) {
            return Ok(RunOutcome {
                records,
                termination: t,
            });
        }
        vecops::axpy(-schedule.at(iter), &gradient, &mut xi);
        if !vecops::all_finite(&xi) {
            return Ok(RunOutcome {
                records,
                termination: Termination::NonFinite,
            });
        }
        iter += 1;
    }
}

/// SGD with per-iteration Monte Carlo batches grown until the relative
/// statistical error constraint holds, reusing the jackknife norm
/// resampling on a single-layer hierarchy. Fixed step as in the
/// estimator-driven SGD.
pub fn run_sgd_a<P: StochasticProblem>(
    problem: &P,
    xi0: &[f64],
    cfg: &MiceConfig,
    step: Option<f64>,
    stop: &[StoppingRule],
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<RunOutcome, OptimError> {
    cfg.validate()?;
    let eta = match step {
        Some(e) => e,
        None => {
            let c = problem.constants().ok_or(OptimError::MissingConstants)?;
            step_size_strongly_convex(c.lipschitz, c.strong_convexity, cfg.eps)?
        }
    };
    let recorder = Recorder::new(problem, opts);
    let mut xi = xi0.to_vec();
    let mut evals = 0u64;
    let mut records = Vec::new();
    let mut iter = 0u64;
    loop {
        // A fresh single-layer hierarchy per iteration: the initial-iteration
        // path of the estimator is exactly the adaptive-batch procedure.
        let mut single = Hierarchy::new(problem.dim(), problem.population());
        let report = match mice_iteration(&mut single, problem, &xi, cfg, rng) {
            Ok(r) => r,
            Err(MiceError::ZeroNorm) => {
                return Ok(RunOutcome {
                    records,
                    termination: Termination::ZeroNorm,
                })
            }
            Err(e) => return Err(e.into()),
        };
        evals += report.new_gradient_evals;
        let grad_norm = vecops::norm(&report.gradient);
        if iter % opts.record_every == 0 {
            let mut record = recorder.record(problem, iter, evals, &xi, grad_norm);
            record.stat_err_sq = Some(report.stat_error_sq);
            record.hierarchy_len = 1;
            record.per_layer = report.per_layer.clone();
            records.push(record);
        }
        if let Some(t) = stopped(stop, iter + 1, evals, grad_norm) {
            return Ok(RunOutcome {
                records,
                termination: t,
            });
        }
        vecops::axpy(-eta, &report.gradient, &mut xi);
        if !vecops::all_finite(&xi) {
            return Ok(RunOutcome {
                records,
                termination: Termination::NonFinite,
            });
        }
        iter += 1;
    }
}
