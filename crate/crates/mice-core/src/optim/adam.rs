//! Adam with bias correction, in two flavors: driven by the estimator
//! hierarchy or by plain Monte Carlo minibatches.

use super::{
    stopped, OptimError, Recorder, RunOptions, RunOutcome, StepSchedule, StoppingRule,
    Termination,
};
use crate::estimator::{mice_iteration, Hierarchy, MiceConfig, MiceError};
use crate::problems::StochasticProblem;
use crate::rng::RngStream;
use crate::vecops;

/// Moment-decay constants; defaults follow the usual recommendation
/// (beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8).
#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    params: AdamParams,
    steps: u64,
}

impl AdamState {
    fn new(dim: usize, params: AdamParams) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            params,
            steps: 0,
        }
    }

    /// One Adam update with standard bias correction using the current
    /// moments.
    fn apply(&mut self, xi: &mut [f64], gradient: &[f64], eta: f64) {
        self.steps += 1;
        let AdamParams {
            beta1,
            beta2,
            epsilon,
        } = self.params;
        let bc1 = 1.0 - beta1.powi(self.steps as i32);
        let bc2 = 1.0 - beta2.powi(self.steps as i32);
        for i in 0..xi.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * gradient[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * gradient[i] * gradient[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            xi[i] -= eta * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

/// Adam driven by the multi-iteration estimator at a fixed step size.
pub fn run_adam_mice<P: StochasticProblem>(
    problem: &P,
    xi0: &[f64],
    cfg: &MiceConfig,
    eta: f64,
    params: AdamParams,
    stop: &[StoppingRule],
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<RunOutcome, OptimError> {
    cfg.validate()?;
    if eta <= 0.0 {
        return Err(OptimError::InvalidParameter("step must be positive".into()));
    }
    let recorder = Recorder::new(problem, opts);
    let mut hierarchy = Hierarchy::new(problem.dim(), problem.population());
    let mut state = AdamState::new(problem.dim(), params);
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
        state.apply(&mut xi, &report.gradient, eta);
        if !vecops::all_finite(&xi) {
            return Ok(RunOutcome {
                records,
                termination: Termination::NonFinite,
            });
        }
        iter += 1;
    }
}

/// Plain Adam on fixed-size Monte Carlo minibatches.
pub fn run_adam<P: StochasticProblem>(
    problem: &P,
    xi0: &[f64],
    schedule: StepSchedule,
    batch: u64,
    params: AdamParams,
    stop: &[StoppingRule],
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<RunOutcome, OptimError> {
    if batch == 0 {
        return Err(OptimError::InvalidParameter("batch must be positive".into()));
    }
    let recorder = Recorder::new(problem, opts);
    let mut state = AdamState::new(problem.dim(), params);
    let mut xi = xi0.to_vec();
    let mut evals = 0u64;
    let mut records = Vec::new();
    let mut iter = 0u64;
    loop {
        let (gradient, spent) = super::batch_gradient(problem, &xi, batch, rng);
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
        state.apply(&mut xi, &gradient, schedule.at(iter));
        if !vecops::all_finite(&xi) {
            return Ok(RunOutcome {
                records,
                termination: Termination::NonFinite,
            });
        }
        iter += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Population, ProblemConstants, RandomEvent};

    /// Problem with a constant, deterministic gradient.
    struct ConstantGradient(Vec<f64>);

    impl StochasticProblem for ConstantGradient {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn population(&self) -> Population {
            Population::Infinite
        }
        fn sample_event(&self, _rng: &mut RngStream) -> RandomEvent {
            RandomEvent::Draw(vec![])
        }
        fn gradient(&self, _xi: &[f64], _event: &RandomEvent) -> Vec<f64> {
            self.0.clone()
        }
        fn true_gradient(&self, _xi: &[f64]) -> Option<Vec<f64>> {
            Some(self.0.clone())
        }
        fn constants(&self) -> Option<ProblemConstants> {
            Some(ProblemConstants {
                lipschitz: 1.0,
                strong_convexity: 1.0,
                lipschitz_as: None,
            })
        }
    }

    #[test]
    fn first_step_bias_correction_cancels() {
        let g = [3.0, -0.5];
        let mut state = AdamState::new(2, AdamParams::default());
        let mut xi = vec![0.0, 0.0];
        let eta = 0.1;
        state.apply(&mut xi, &g, eta);
        // m_hat = g and v_hat = g^2 exactly in the first step, so the update
        // is -eta * g / (|g| + eps_adam).
        for i in 0..2 {
            let expected = -eta * g[i] / (g[i].abs() + 1e-8);
            assert!(
                (xi[i] - expected).abs() <= 1e-14 * expected.abs(),
                "component {i}: {} vs {}",
                xi[i],
                expected
            );
            let m_hat = state.m[i] / (1.0 - 0.9_f64);
            let v_hat = state.v[i] / (1.0 - 0.999_f64);
            assert!((m_hat - g[i]).abs() <= 1e-14 * g[i].abs());
            assert!((v_hat - g[i] * g[i]).abs() <= 1e-14 * (g[i] * g[i]));
        }
    }

    #[test]
    fn zero_gradient_stream_keeps_iterates_stationary() {
        let problem = ConstantGradient(vec![0.0, 0.0]);
        let mut rng = RngStream::new(0, 0);
        let outcome = run_adam(
            &problem,
            &[1.0, -2.0],
            StepSchedule::Constant(0.1),
            1,
            AdamParams::default(),
            &[StoppingRule::MaxIters(20)],
            &RunOptions::default(),
            &mut rng,
        )
        .unwrap();
        let last = outcome.final_record().unwrap();
        assert_eq!(last.xi, vec![1.0, -2.0]);
    }

    #[test]
    fn constant_gradient_limit_is_unit_scaled_step() {
        // With a fixed gradient the update direction tends to
        // -eta * sign(g) per component.
        let problem = ConstantGradient(vec![2.0, -4.0]);
        let mut rng = RngStream::new(0, 0);
        let eta = 0.01;
        let outcome = run_adam(
            &problem,
            &[0.0, 0.0],
            StepSchedule::Constant(eta),
            1,
            AdamParams::default(),
            &[StoppingRule::MaxIters(500)],
            &RunOptions::default(),
            &mut rng,
        )
        .unwrap();
        let last = outcome.final_record().unwrap();
        // After 500 iterations the trajectory has moved about
        // -eta * sign(g) * iters in each component.
        let expected0 = -eta * 500.0;
        let expected1 = eta * 500.0;
        assert!((last.xi[0] - expected0).abs() < 0.05 * expected0.abs());
        assert!((last.xi[1] - expected1).abs() < 0.05 * expected1.abs());
    }
}
