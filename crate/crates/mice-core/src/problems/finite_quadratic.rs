//! Finite-sum quadratic: `f_i(xi) = 1/2 xi . H_i xi - b_i . xi` over a small
//! population of per-sample Hessians. The exact mean gradient is a finite sum,
//! which makes this the reference problem for exactness checks.

use super::{Population, ProblemConstants, RandomEvent, StochasticProblem};
use crate::rng::RngStream;
use crate::vecops;

#[derive(Debug, Clone)]
pub struct FiniteQuadratic {
    hessians: Vec<Vec<Vec<f64>>>,
    rhs: Vec<Vec<f64>>,
    dim: usize,
}

pub fn finite_quadratic_problem(hessians: Vec<Vec<Vec<f64>>>, rhs: Vec<Vec<f64>>) -> FiniteQuadratic {
    assert!(!hessians.is_empty());
    assert_eq!(hessians.len(), rhs.len());
    let dim = rhs[0].len();
    for (h, b) in hessians.iter().zip(&rhs) {
        assert_eq!(h.len(), dim);
        assert_eq!(b.len(), dim);
    }
    FiniteQuadratic { hessians, rhs, dim }
}

/// The two-point instance used throughout the exactness tests.
pub fn two_point_quadratic() -> FiniteQuadratic {
    finite_quadratic_problem(
        vec![
            vec![vec![3.0, 0.5], vec![0.5, 1.0]],
            vec![vec![1.0, -0.25], vec![-0.25, 2.0]],
        ],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    )
}

impl FiniteQuadratic {
    fn mean_hessian(&self) -> Vec<Vec<f64>> {
        let n = self.hessians.len() as f64;
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for h in &self.hessians {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    m[i][j] += h[i][j] / n;
                }
            }
        }
        m
    }

    fn mean_rhs(&self) -> Vec<f64> {
        let n = self.rhs.len() as f64;
        let mut b = vec![0.0; self.dim];
        for r in &self.rhs {
            for (bi, ri) in b.iter_mut().zip(r) {
                *bi += ri / n;
            }
        }
        b
    }
}

impl StochasticProblem for FiniteQuadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn population(&self) -> Population {
        Population::Finite(self.hessians.len())
    }

    fn sample_event(&self, rng: &mut RngStream) -> RandomEvent {
        RandomEvent::Index(rng.index(self.hessians.len()))
    }

    fn gradient(&self, xi: &[f64], event: &RandomEvent) -> Vec<f64> {
        let i = event.index().expect("finite quadratic uses index events");
        let mut g = vecops::matvec(&self.hessians[i], xi);
        for (gc, bc) in g.iter_mut().zip(&self.rhs[i]) {
            *gc -= bc;
        }
        g
    }

    fn objective(&self, xi: &[f64], event: &RandomEvent) -> Option<f64> {
        let i = event.index()?;
        let hx = vecops::matvec(&self.hessians[i], xi);
        Some(0.5 * vecops::dot(xi, &hx) - vecops::dot(&self.rhs[i], xi))
    }

    fn true_gradient(&self, xi: &[f64]) -> Option<Vec<f64>> {
        let mut g = vecops::matvec(&self.mean_hessian(), xi);
        for (gc, bc) in g.iter_mut().zip(&self.mean_rhs()) {
            *gc -= bc;
        }
        Some(g)
    }

    fn true_objective(&self, xi: &[f64]) -> Option<f64> {
        let hx = vecops::matvec(&self.mean_hessian(), xi);
        Some(0.5 * vecops::dot(xi, &hx) - vecops::dot(&self.mean_rhs(), xi))
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        let xi = vecops::spd_solve(&self.mean_hessian(), &self.mean_rhs()).ok()?;
        let f = self.true_objective(&xi)?;
        Some((xi, f))
    }

    fn constants(&self) -> Option<ProblemConstants> {
        let (vals, _) = vecops::sym_eigen(&self.mean_hessian());
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo <= 0.0 {
            return None;
        }
        Some(ProblemConstants {
            lipschitz: hi,
            strong_convexity: lo,
            lipschitz_as: None,
        })
    }
}
