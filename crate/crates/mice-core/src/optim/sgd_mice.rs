//! SGD driven by the multi-iteration estimator: fixed step
//! `2 / ((L + mu)(1 + eps^2))` unless overridden, one estimator update per
//! iteration.

use super::{
    step_size_strongly_convex, stopped, OptimError, Recorder, RunOptions, RunOutcome,
    StoppingRule, Termination,
};
use crate::estimator::{mice_iteration, Hierarchy, MiceConfig, MiceError};
use crate::problems::StochasticProblem;
use crate::rng::RngStream;
use crate::vecops;

pub fn run_sgd_mice<P: StochasticProblem>(
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
    let mut hierarchy = Hierarchy::new(problem.dim(), problem.population());
    let mut xi = xi0.to_vec();
    let mut evals = 0u64;
    let mut records = Vec::new();
    let mut iter = 0u64;
    loop {
        let report = match mice_iteration(&mut hierarchy, problem, &xi, cfg, rng) {
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
            record.action = report.action.to_string();
            record.hierarchy_len = hierarchy.len() as u32;
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
