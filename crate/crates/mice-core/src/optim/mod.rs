//! First-order optimizers consuming estimator or baseline gradients.
//!
//! All runners share the same contract: they consume gradients only through
//! the problem/estimator interfaces, emit [`RunRecord`] telemetry, honor
//! composable stopping rules, and abort with the last valid record retained
//! when an iterate turns non-finite.

use std::time::Instant;

use thiserror::Error;

use crate::estimator::MiceError;
use crate::problems::StochasticProblem;
use crate::telemetry::RunRecord;
use crate::vecops;

mod adam;
mod baselines;
mod finite_sum;
mod idealized;
mod sgd_mice;

pub use adam::{run_adam, run_adam_mice, AdamParams};
pub use baselines::{run_sgd_a, run_vanilla_sgd};
pub use finite_sum::{reference_step_size, run_sag, run_saga, run_sarah, run_svrg, TableMethod};
pub use idealized::run_idealized_sgd_mice;
pub use sgd_mice::run_sgd_mice;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("problem provides no smoothness constants; supply a step size")]
    MissingConstants,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("covariance is not positive semi-definite: {0}")]
    NonPsdCovariance(String),
    #[error(transparent)]
    Estimator(MiceError),
}

impl From<MiceError> for OptimError {
    fn from(e: MiceError) -> Self {
        match e {
            MiceError::InvalidConfig(msg) => OptimError::InvalidParameter(msg),
            other => OptimError::Estimator(other),
        }
    }
}

/// Composable stopping criteria; a run stops when any rule fires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    MaxGradEvals(u64),
    /// Stop when the gradient-norm estimate falls below `mu * tol`.
    GradNorm { mu: f64, tol: f64 },
    MaxIters(u64),
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxGradEvals,
    GradNorm,
    MaxIters,
    /// The estimator's norm estimate vanished (stopping signal).
    ZeroNorm,
    /// An iterate stopped being finite; the last valid record is retained.
    NonFinite,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub termination: Termination,
}

impl RunOutcome {
    pub fn final_record(&self) -> Option<&RunRecord> {
        self.records.last()
    }
}

/// Knobs shared by every runner.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Inner steps between records for sample-by-sample baselines; the
    /// hierarchy-based runners record every iteration.
    pub record_every: u64,
    /// Reference optimal value for the optimality gap; falls back to the
    /// problem's analytic optimum.
    pub reference_objective: Option<f64>,
    /// Record wall-clock times. Off by default so identical seeds produce
    /// byte-identical telemetry.
    pub wall_time: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_every: 1,
            reference_objective: None,
            wall_time: false,
        }
    }
}

/// Step-size schedules for the baseline methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `eta0 / (1 + k / k0)` at iteration `k` (0-based).
    InverseLinear { eta0: f64, k0: f64 },
    /// `eta0 / sqrt(k + 1)` at iteration `k` (0-based).
    InverseSqrt { eta0: f64 },
}

impl StepSchedule {
    pub fn at(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::Constant(eta) => eta,
            StepSchedule::InverseLinear { eta0, k0 } => eta0 / (1.0 + k as f64 / k0),
            StepSchedule::InverseSqrt { eta0 } => eta0 / ((k + 1) as f64).sqrt(),
        }
    }
}

/// The constant step size that keeps strongly convex SGD linearly
/// convergent under relative gradient-error control:
/// `2 / ((L + mu)(1 + eps^2))`.
pub fn step_size_strongly_convex(
    lipschitz: f64,
    strong_convexity: f64,
    eps: f64,
) -> Result<f64, OptimError> {
    if !(strong_convexity > 0.0 && lipschitz >= strong_convexity) {
        return Err(OptimError::InvalidParameter(format!(
            "need L >= mu > 0, got L = {lipschitz}, mu = {strong_convexity}"
        )));
    }
    if eps < 0.0 {
        return Err(OptimError::InvalidParameter(format!(
            "eps must be nonnegative, got {eps}"
        )));
    }
    Ok(2.0 / ((lipschitz + strong_convexity) * (1.0 + eps * eps)))
}

pub(crate) fn stopped(
    rules: &[StoppingRule],
    iters_done: u64,
    evals: u64,
    grad_norm: f64,
) -> Option<Termination> {
    for rule in rules {
        match *rule {
            StoppingRule::MaxGradEvals(budget) if evals >= budget => {
                return Some(Termination::MaxGradEvals)
            }
            StoppingRule::GradNorm { mu, tol } if grad_norm < mu * tol => {
                return Some(Termination::GradNorm)
            }
            StoppingRule::MaxIters(k) if iters_done >= k => return Some(Termination::MaxIters),
            _ => {}
        }
    }
    None
}

/// Shared record construction: objective and gap from the problem's exact
/// objective when available.
pub(crate) struct Recorder {
    f_star: Option<f64>,
    start: Instant,
    wall_time: bool,
}

impl Recorder {
    pub(crate) fn new<P: StochasticProblem>(problem: &P, opts: &RunOptions) -> Self {
        Self {
            f_star: opts
                .reference_objective
                .or_else(|| problem.optimum().map(|(_, f)| f)),
            start: Instant::now(),
            wall_time: opts.wall_time,
        }
    }

    pub(crate) fn record<P: StochasticProblem>(
        &self,
        problem: &P,
        iter: u64,
        evals: u64,
        xi: &[f64],
        grad_norm_est: f64,
    ) -> RunRecord {
        let objective = problem.true_objective(xi);
        let opt_gap = match (objective, self.f_star) {
            (Some(o), Some(f)) => Some(o - f),
            _ => None,
        };
        RunRecord {
            iter,
            grad_evals_cum: evals,
            time_s: if self.wall_time {
                self.start.elapsed().as_secs_f64()
            } else {
                0.0
            },
            objective,
            opt_gap,
            grad_norm_est,
            stat_err_sq: None,
            action: String::new(),
            hierarchy_len: 0,
            xi: xi.to_vec(),
            per_layer: Vec::new(),
        }
    }
}

/// Mean gradient over `batch` freshly sampled events.
pub(crate) fn batch_gradient<P: StochasticProblem>(
    problem: &P,
    xi: &[f64],
    batch: u64,
    rng: &mut crate::rng::RngStream,
) -> (Vec<f64>, u64) {
    let mut mean = vec![0.0; problem.dim()];
    for _ in 0..batch {
        let event = problem.sample_event(rng);
        let g = problem.gradient(xi, &event);
        vecops::axpy(1.0 / batch as f64, &g, &mut mean);
    }
    (mean, batch)
}
