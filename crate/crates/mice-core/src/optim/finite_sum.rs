//! Reference variance-reduced methods for finite sums: SVRG, SARAH, SAG,
//! SAGA. Epoch (inner-loop) length for SVRG/SARAH is the population size and
//! anchors move to the last iterate; SAG/SAGA start from zero gradient
//! tables. Step sizes follow the usual per-method recommendations, exposed
//! through [`reference_step_size`].

use super::{
    stopped, OptimError, Recorder, RunOptions, RunOutcome, StoppingRule, Termination,
};
use crate::problems::{Population, RandomEvent, StochasticProblem};
use crate::rng::RngStream;
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMethod {
    Sag,
    Saga,
    Sarah,
    Svrg,
}

/// Recommended step sizes: SAG `1/(16(L_as + mu N))`, SAGA
/// `1/(2(L_as + mu N))`, SARAH and SVRG `1/(2 L_as)`.
pub fn reference_step_size(method: TableMethod, l_as: f64, mu: f64, n: usize) -> f64 {
    match method {
        TableMethod::Sag => 1.0 / (16.0 * (l_as + mu * n as f64)),
        TableMethod::Saga => 1.0 / (2.0 * (l_as + mu * n as f64)),
        TableMethod::Sarah | TableMethod::Svrg => 1.0 / (2.0 * l_as),
    }
}

fn population_size<P: StochasticProblem>(problem: &P) -> Result<usize, OptimError> {
    match problem.population() {
        Population::Finite(n) if n > 0 => Ok(n),
        Population::Finite(_) => Err(OptimError::InvalidParameter("empty population".into())),
        Population::Infinite => Err(OptimError::InvalidParameter(
            "finite-sum method requires a finite population".into(),
        )),
    }
}

fn full_gradient<P: StochasticProblem>(problem: &P, xi: &[f64], n: usize) -> Vec<f64> {
    let mut g = vec![0.0; problem.dim()];
    for i in 0..n {
        let gi = problem.gradient(xi, &RandomEvent::Index(i));
        vecops::axpy(1.0 / n as f64, &gi, &mut g);
    }
    g
}

macro_rules! emit_and_check {
    ($recorder:ident, $problem:ident, $opts:ident, $records:ident, $stop:ident,
     $iter:ident, $evals:ident, $xi:ident, $norm:expr) => {{
        let norm = $norm;
        if $iter % $opts.record_every == 0 {
            $records.push($recorder.record($problem, $iter, $evals, &$xi, norm));
        }
        if let Some(t) = stopped($stop, $iter + 1, $evals, norm) {
            return Ok(RunOutcome {
                records: $records,
                termination: t,
            });
        }
    }};
}

/// SVRG: per epoch, one full gradient at the anchor plus `N` inner steps of
/// `grad_i(xi) - grad_i(anchor) + full`.
pub fn run_svrg<P: StochasticProblem>(
    problem: &P,
    xi0: &[f64],
    step: f64,
    stop: &[StoppingRule],
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<RunOutcome, OptimError> {
    let n = population_size(problem)?;
    let recorder = Recorder::new(problem, opts);
    let mut xi = xi0.to_vec();
    let mut records = Vec::new();
    let mut evals = 0u64;
    let mut iter = 0u64;
    loop {
        let anchor = xi.clone();
        let full = full_gradient(problem, &anchor, n);
        evals += n as u64;
        for _ in 0..n {
            let i = rng.index(n);
            let event = RandomEvent::Index(i);
            let g_cur = problem.gradient(&xi, &event);
            let g_anchor = problem.gradient(&anchor, &event);
            evals += 2;
            let mut direction = full.clone();
            for c in 0..direction.len() {
                direction[c] += g_cur[c] - g_anchor[c];
            }
            emit_and_check!(
                recorder, problem, opts, records, stop, iter, evals, xi,
                vecops::norm(&direction)
            );
            vecops::axpy(-step, &direction, &mut xi);
            if !vecops::all_finite(&xi) {
                return Ok(RunOutcome {
                    records,
                    termination: Termination::NonFinite,
                });
            }
            iter += 1;
        }
    }
}

/// SARAH: per epoch, one full gradient then a recursive direction
/// `v <- grad_i(xi_t) - grad_i(xi_{t-1}) + v`.
pub fn run_sarah<P: StochasticProblem>(
    problem: &P,
    xi0: &[f64],
    step: f64,
    stop: &[StoppingRule],
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<RunOutcome, OptimError> {
    let n = population_size(problem)?;
    let recorder = Recorder::new(problem, opts);
    let mut xi = xi0.to_vec();
    let mut records = Vec::new();
    let mut evals = 0u64;
    let mut iter = 0u64;
    loop {
        let mut direction = full_gradient(problem, &xi, n);
        evals += n as u64;
        emit_and_check!(
            recorder, problem, opts, records, stop, iter, evals, xi,
            vecops::norm(&direction)
        );
        let mut prev = xi.clone();
        vecops::axpy(-step, &direction, &mut xi);
        if !vecops::all_finite(&xi) {
            return Ok(RunOutcome {
                records,
                termination: Termination::NonFinite,
            });
        }
        iter += 1;
        for _ in 0..n {
            let i = rng.index(n);
            let event = RandomEvent::Index(i);
            let g_cur = problem.gradient(&xi, &event);
            let g_prev = problem.gradient(&prev, &event);
            evals += 2;
            for c in 0..direction.len() {
                direction[c] += g_cur[c] - g_prev[c];
            }
            emit_and_check!(
                recorder, problem, opts, records, stop, iter, evals, xi,
                vecops::norm(&direction)
            );
            prev.copy_from_slice(&xi);
            vecops::axpy(-step, &direction, &mut xi);
            if !vecops::all_finite(&xi) {
                return Ok(RunOutcome {
                    records,
                    termination: Termination::NonFinite,
                });
            }
            iter += 1;
        }
    }
}

/// SAG: per-sample gradient table, direction is the table average after
/// refreshing the drawn sample.
pub fn run_sag<P: StochasticProblem>(
    problem: &P,
    xi0: &[f64],
    step: f64,
    stop: &[StoppingRule],
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<RunOutcome, OptimError> {
    run_tabular(problem, xi0, step, stop, opts, rng, true)
}

/// SAGA: unbiased direction `grad_i(xi) - table_i + mean(table)` with the
/// table refreshed afterwards.
pub fn run_saga<P: StochasticProblem>(
    problem: &P,
    xi0: &[f64],
    step: f64,
    stop: &[StoppingRule],
    opts: &RunOptions,
    rng: &mut RngStream,
) -> Result<RunOutcome, OptimError> {
    run_tabular(problem, xi0, step, stop, opts, rng, false)
}

fn run_tabular<P: StochasticProblem>(
    problem: &P,
    xi0: &[f64],
    step: f64,
    stop: &[StoppingRule],
    opts: &RunOptions,
    rng: &mut RngStream,
    averaged: bool,
) -> Result<RunOutcome, OptimError> {
    let n = population_size(problem)?;
    let dim = problem.dim();
    let recorder = Recorder::new(problem, opts);
    let mut table = vec![vec![0.0; dim]; n];
    let mut table_sum = vec![0.0; dim];
    let mut xi = xi0.to_vec();
    let mut records = Vec::new();
    let mut evals = 0u64;
    let mut iter = 0u64;
    loop {
        let i = rng.index(n);
        let g_new = problem.gradient(&xi, &RandomEvent::Index(i));
        evals += 1;
        let direction: Vec<f64> = if averaged {
            // SAG: refresh the table first, then average.
            for c in 0..dim {
                table_sum[c] += g_new[c] - table[i][c];
            }
            table[i].copy_from_slice(&g_new);
            table_sum.iter().map(|s| s / n as f64).collect()
        } else {
            // SAGA: unbiased correction against the stale entry.
            let dir: Vec<f64> = (0..dim)
                .map(|c| g_new[c] - table[i][c] + table_sum[c] / n as f64)
                .collect();
            for c in 0..dim {
                table_sum[c] += g_new[c] - table[i][c];
            }
            table[i].copy_from_slice(&g_new);
            dir
        };
        emit_and_check!(
            recorder, problem, opts, records, stop, iter, evals, xi,
            vecops::norm(&direction)
        );
        vecops::axpy(-step, &direction, &mut xi);
        if !vecops::all_finite(&xi) {
            return Ok(RunOutcome {
                records,
                termination: Termination::NonFinite,
            });
        }
        iter += 1;
    }
}
