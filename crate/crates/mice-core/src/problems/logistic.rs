//! L2-regularized logistic regression over a sparse dataset.
//!
//! Per-sample objective: `f_i(xi) = log(1 + exp(-y_i xi.x_i)) + lambda/2 |xi|^2`,
//! so the finite-population mean equals the usual regularized log-loss.
//! Constants: `mu = lambda`, `L = lambda + lambda_max(X^T X / N)` via power
//! iteration, `L_as = lambda + max_i |x_i|^2 / 4`.

use std::sync::Arc;

use super::{Population, ProblemConstants, RandomEvent, StochasticProblem};
use crate::data::SparseDataset;
use crate::rng::RngStream;
use crate::vecops;

#[derive(Debug, Clone)]
pub struct LogisticProblem {
    dataset: Arc<SparseDataset>,
    lambda: f64,
    constants: ProblemConstants,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn gram_spectral_norm(dataset: &SparseDataset) -> f64 {
    let d = dataset.num_features();
    let n = dataset.len() as f64;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda_max = 0.0;
    for _ in 0..200 {
        // w = X^T (X v) / N accumulated row by row.
        let mut w = vec![0.0; d];
        for i in 0..dataset.len() {
            let row = dataset.row(i);
            let mut xv = 0.0;
            for &(j, x) in row {
                xv += x * v[j];
            }
            for &(j, x) in row {
                w[j] += x * xv;
            }
        }
        for wj in w.iter_mut() {
            *wj /= n;
        }
        let norm = vecops::norm(&w);
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        for (vj, wj) in v.iter_mut().zip(&w) {
            *vj = wj / norm;
        }
        if (next - lambda_max).abs() <= 1e-10 * next.max(1.0) {
            lambda_max = next;
            break;
        }
        lambda_max = next;
    }
    lambda_max
}

/// Build the logistic problem. Labels must already be normalized to
/// {-1, +1}; `lambda > 0`.
pub fn logistic_problem(dataset: SparseDataset, lambda: f64) -> LogisticProblem {
    assert!(lambda > 0.0, "lambda must be positive");
    assert!(!dataset.is_empty(), "dataset must be nonempty");
    for i in 0..dataset.len() {
        let y = dataset.label(i);
        assert!(y == 1.0 || y == -1.0, "label {y} at row {i} not in {{-1,+1}}");
    }
    let lipschitz = lambda + gram_spectral_norm(&dataset);
    let lipschitz_as = lambda + dataset.max_row_norm_sq() / 4.0;
    LogisticProblem {
        dataset: Arc::new(dataset),
        lambda,
        constants: ProblemConstants {
            lipschitz,
            strong_convexity: lambda,
            lipschitz_as: Some(lipschitz_as),
        },
    }
}

impl LogisticProblem {
    pub fn dataset(&self) -> &SparseDataset {
        &self.dataset
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn margin(&self, xi: &[f64], i: usize) -> f64 {
        let mut z = 0.0;
        for &(j, x) in self.dataset.row(i) {
            z += x * xi[j];
        }
        self.dataset.label(i) * z
    }
}

impl StochasticProblem for LogisticProblem {
    fn dim(&self) -> usize {
        self.dataset.num_features()
    }

    fn population(&self) -> Population {
        Population::Finite(self.dataset.len())
    }

    fn sample_event(&self, rng: &mut RngStream) -> RandomEvent {
        RandomEvent::Index(rng.index(self.dataset.len()))
    }

    fn gradient(&self, xi: &[f64], event: &RandomEvent) -> Vec<f64> {
        let i = event.index().expect("logistic problem uses index events");
        let y = self.dataset.label(i);
        let s = sigmoid(-self.margin(xi, i));
        let mut g: Vec<f64> = xi.iter().map(|v| self.lambda * v).collect();
        for &(j, x) in self.dataset.row(i) {
            g[j] -= y * x * s;
        }
        g
    }

    fn objective(&self, xi: &[f64], event: &RandomEvent) -> Option<f64> {
        let i = event.index()?;
        Some(log1p_exp(-self.margin(xi, i)) + 0.5 * self.lambda * vecops::norm_sq(xi))
    }

    fn true_gradient(&self, xi: &[f64]) -> Option<Vec<f64>> {
        let n = self.dataset.len() as f64;
        let mut g: Vec<f64> = xi.iter().map(|v| self.lambda * v).collect();
        for i in 0..self.dataset.len() {
            let y = self.dataset.label(i);
            let s = sigmoid(-self.margin(xi, i));
            for &(j, x) in self.dataset.row(i) {
                g[j] -= y * x * s / n;
            }
        }
        Some(g)
    }

    fn true_objective(&self, xi: &[f64]) -> Option<f64> {
        let n = self.dataset.len() as f64;
        let mut loss = 0.0;
        for i in 0..self.dataset.len() {
            loss += log1p_exp(-self.margin(xi, i));
        }
        Some(loss / n + 0.5 * self.lambda * vecops::norm_sq(xi))
    }

    fn constants(&self) -> Option<ProblemConstants> {
        Some(self.constants)
    }
}
