//! Quadratic with additive Gaussian shifts: gradient differences between any
//! two design points are deterministic, so every control-variate layer has
//! exactly zero variance. Useful as a degenerate stress test.

use rand_distr::{Distribution, Normal};

use super::{Population, ProblemConstants, RandomEvent, StochasticProblem};
use crate::rng::RngStream;


const H: [[f64; 2]; 2] = [[100.0, 3.0], [3.0, 8.0]];

#[derive(Debug, Clone)]
pub struct ShiftedQuadratic {
    sigma: f64,
    lipschitz: f64,
    strong_convexity: f64,
}

/// `f(xi, t) = (xi + t0 1) . H . (xi + t1 1)` with independent
/// `t0, t1 ~ N(0, sigma^2)`.
pub fn shifted_quadratic_problem(sigma: f64) -> ShiftedQuadratic {
    assert!(sigma > 0.0, "sigma must be positive");
    // Mean objective is xi . H xi, whose Hessian is H + H^T = 2H.
    let tr = 2.0 * (H[0][0] + H[1][1]);
    let det = 4.0 * (H[0][0] * H[1][1] - H[0][1] * H[1][0]);
    let disc = (tr * tr - 4.0 * det).sqrt();
    ShiftedQuadratic {
        sigma,
        lipschitz: 0.5 * (tr + disc),
        strong_convexity: 0.5 * (tr - disc),
    }
}

impl StochasticProblem for ShiftedQuadratic {
    fn dim(&self) -> usize {
        2
    }

    fn population(&self) -> Population {
        Population::Infinite
    }

    fn sample_event(&self, rng: &mut RngStream) -> RandomEvent {
        let normal = Normal::new(0.0, self.sigma).unwrap();
        RandomEvent::Draw(vec![normal.sample(rng), normal.sample(rng)])
    }

    fn gradient(&self, xi: &[f64], event: &RandomEvent) -> Vec<f64> {
        let (t0, t1) = match event {
            RandomEvent::Draw(d) => (d[0], d[1]),
            RandomEvent::Index(_) => panic!("shifted quadratic uses continuous events"),
        };
        // grad = H (xi + t1 1) + H^T (xi + t0 1), H symmetric.
        let mut g = vec![0.0; 2];
        for i in 0..2 {
            for j in 0..2 {
                g[i] += H[i][j] * (xi[j] + t1) + H[j][i] * (xi[j] + t0);
            }
        }
        g
    }

    fn objective(&self, xi: &[f64], event: &RandomEvent) -> Option<f64> {
        let (t0, t1) = match event {
            RandomEvent::Draw(d) => (d[0], d[1]),
            RandomEvent::Index(_) => return None,
        };
        let left = [xi[0] + t0, xi[1] + t0];
        let right = [xi[0] + t1, xi[1] + t1];
        let mut value = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                value += left[i] * H[i][j] * right[j];
            }
        }
        Some(value)
    }

    fn true_gradient(&self, xi: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; 2];
        for i in 0..2 {
            for j in 0..2 {
                g[i] += (H[i][j] + H[j][i]) * xi[j];
            }
        }
        Some(g)
    }

    fn true_objective(&self, xi: &[f64]) -> Option<f64> {
        let mut value = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                value += xi[i] * H[i][j] * xi[j];
            }
        }
        Some(value)
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        Some((vec![0.0, 0.0], 0.0))
    }

    fn constants(&self) -> Option<ProblemConstants> {
        Some(ProblemConstants {
            lipschitz: self.lipschitz,
            strong_convexity: self.strong_convexity,
            lipschitz_as: None,
        })
    }

    /// grad - E[grad] = H 1 (t0 + t1), a rank-one Gaussian direction.
    fn gradient_covariance(&self, _xi: &[f64]) -> Option<Vec<Vec<f64>>> {
        let h1 = [H[0][0] + H[0][1], H[1][0] + H[1][1]];
        let scale = 2.0 * self.sigma * self.sigma;
        let mut cov = vec![vec![0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] = scale * h1[i] * h1[j];
            }
        }
        Some(cov)
    }
}
