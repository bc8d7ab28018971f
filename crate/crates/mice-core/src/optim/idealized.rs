//! SGD with synthetic Gaussian gradient noise calibrated to the relative
//! tolerance: the update uses `g + (eps |g| / sqrt(tr Cov)) chi` with
//! `chi ~ N(0, Cov)`, so the estimate is unbiased with relative mean-squared
//! error exactly `eps^2`. Requires the exact gradient and a gradient
//! covariance; useful for validating convergence rates, not for practical
//! optimization.

use rand_distr::{Distribution, StandardNormal};

use super::{
    step_size_strongly_convex, stopped, OptimError, Recorder, RunOptions, RunOutcome,
    StoppingRule, Termination,
};
use crate::problems::StochasticProblem;
use crate::rng::RngStream;
use crate::vecops;

pub fn run_idealized_sgd_mice<P: StochasticProblem>(
    problem: &P,
    xi0: &[f64],
    eps: f64,
    step: Option<f64>,
    stop: &[StoppingRule],
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<RunOutcome, OptimError> {
    if eps < 0.0 {
        return Err(OptimError::InvalidParameter(
            "eps must be nonnegative".into(),
        ));
    }
    let eta = match step {
        Some(e) => e,
        None => {
            let c = problem.constants().ok_or(OptimError::MissingConstants)?;
            step_size_strongly_convex(c.lipschitz, c.strong_convexity, eps)?
        }
    };
    let recorder = Recorder::new(problem, opts);
    let mut xi = xi0.to_vec();
    let mut records = Vec::new();
    let mut evals = 0u64;
    let mut iter = 0u64;
    loop {
        let gradient = problem
            .true_gradient(&xi)
            .ok_or_else(|| OptimError::InvalidParameter("problem has no true gradient".into()))?;
        evals += 1;
        let estimate = if eps == 0.0 {
            gradient.clone()
        } else {
            let cov = problem.gradient_covariance(&xi).ok_or_else(|| {
                OptimError::InvalidParameter("problem has no gradient covariance".into())
            })?;
            let trace: f64 = (0..cov.len()).map(|i| cov[i][i]).sum();
            if trace <= 0.0 {
                gradient.clone()
            } else {
                let factor =
                    vecops::psd_factor(&cov).map_err(OptimError::NonPsdCovariance)?;
                let scale = eps * vecops::norm(&gradient) / trace.sqrt();
                let mut noisy = gradient.clone();
                for column in &factor {
                    let z: f64 = StandardNormal.sample(rng);
                    vecops::axpy(scale * z, column, &mut noisy);
                }
                noisy
            }
        };
        let grad_norm = vecops::norm(&estimate);
        if iter % opts.record_every == 0 {
            records.push(recorder.record(problem, iter, evals, &xi, grad_norm));
        }
        if let Some(t) = stopped(stop, iter + 1, evals, grad_norm) {
            return Ok(RunOutcome {
                records,
                termination: t,
            });
        }
        vecops::axpy(-eta, &estimate, &mut xi);
        if !vecops::all_finite(&xi) {
            return Ok(RunOutcome {
                records,
                termination: Termination::NonFinite,
            });
        }
        iter += 1;
    }
}
