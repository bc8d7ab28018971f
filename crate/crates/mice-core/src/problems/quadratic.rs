//! Strongly convex quadratic with a random Hessian.
//!
//! `f(xi, t) = 1/2 xi . H(t) xi - b . xi` with
//! `H(t) = I (1 - t) + [[2k, 0.5], [0.5, 1]] t` and `t ~ U(0, 1)`, so
//! `E[H] = [[k + 0.5, 0.25], [0.25, 1]]`. The single scalar factor makes the
//! gradient covariance rank one and analytic.

use rand::Rng;

use super::{Population, ProblemConstants, RandomEvent, StochasticProblem};
use crate::rng::RngStream;
use crate::vecops;

#[derive(Debug, Clone)]
pub struct StochasticQuadratic {
    kappa: f64,
    mean_hessian: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    optimum: Vec<f64>,
    lipschitz: f64,
    strong_convexity: f64,
}

/// Build the two-dimensional stochastic quadratic with conditioning
/// parameter `kappa > 0`.
pub fn quadratic_problem(kappa: f64) -> StochasticQuadratic {
    assert!(kappa > 0.0, "kappa must be positive");
    let mean_hessian = vec![vec![kappa + 0.5, 0.25], vec![0.25, 1.0]];
    let rhs = vec![1.0, 1.0];
    let optimum = vecops::spd_solve(&mean_hessian, &rhs).expect("mean Hessian is SPD");
    // Extreme eigenvalues of the symmetric 2x2 mean Hessian.
    let tr = mean_hessian[0][0] + mean_hessian[1][1];
    let det = mean_hessian[0][0] * mean_hessian[1][1] - mean_hessian[0][1] * mean_hessian[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    let lipschitz = 0.5 * (tr + disc);
    let strong_convexity = 0.5 * (tr - disc);
    StochasticQuadratic {
        kappa,
        mean_hessian,
        rhs,
        optimum,
        lipschitz,
        strong_convexity,
    }
}

impl StochasticQuadratic {
    fn hessian_at(&self, t: f64) -> [[f64; 2]; 2] {
        let k = self.kappa;
        [
            [(1.0 - t) + 2.0 * k * t, 0.5 * t],
            [0.5 * t, (1.0 - t) + t],
        ]
    }

    /// `H(1) - I`, the direction of the rank-one gradient noise.
    fn noise_matrix(&self) -> [[f64; 2]; 2] {
        let k = self.kappa;
        [[2.0 * k - 1.0, 0.5], [0.5, 0.0]]
    }
}

impl StochasticProblem for StochasticQuadratic {
    fn dim(&self) -> usize {
        2
    }

    fn population(&self) -> Population {
        Population::Infinite
    }

    fn sample_event(&self, rng: &mut RngStream) -> RandomEvent {
        RandomEvent::Draw(vec![rng.gen::<f64>()])
    }

    fn gradient(&self, xi: &[f64], event: &RandomEvent) -> Vec<f64> {
        let t = match event {
            RandomEvent::Draw(d) => d[0],
            RandomEvent::Index(_) => panic!("quadratic problem uses continuous events"),
        };
        let h = self.hessian_at(t);
        vec![
            h[0][0] * xi[0] + h[0][1] * xi[1] - self.rhs[0],
            h[1][0] * xi[0] + h[1][1] * xi[1] - self.rhs[1],
        ]
    }

    fn objective(&self, xi: &[f64], event: &RandomEvent) -> Option<f64> {
        let t = match event {
            RandomEvent::Draw(d) => d[0],
            RandomEvent::Index(_) => return None,
        };
        let h = self.hessian_at(t);
        let hx = [
            h[0][0] * xi[0] + h[0][1] * xi[1],
            h[1][0] * xi[0] + h[1][1] * xi[1],
        ];
        Some(0.5 * (xi[0] * hx[0] + xi[1] * hx[1]) - vecops::dot(&self.rhs, xi))
    }

    fn true_gradient(&self, xi: &[f64]) -> Option<Vec<f64>> {
        let mut g = vecops::matvec(&self.mean_hessian, xi);
        for (gi, bi) in g.iter_mut().zip(&self.rhs) {
            *gi -= bi;
        }
        Some(g)
    }

    fn true_objective(&self, xi: &[f64]) -> Option<f64> {
        let hx = vecops::matvec(&self.mean_hessian, xi);
        Some(0.5 * vecops::dot(xi, &hx) - vecops::dot(&self.rhs, xi))
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        let f_star = self.true_objective(&self.optimum)?;
        Some((self.optimum.clone(), f_star))
    }

    fn constants(&self) -> Option<ProblemConstants> {
        Some(ProblemConstants {
            lipschitz: self.lipschitz,
            strong_convexity: self.strong_convexity,
            lipschitz_as: None,
        })
    }

    /// `Cov = Var(t) (A xi)(A xi)^T` with `A = H(1) - I` and `Var(t) = 1/12`.
    fn gradient_covariance(&self, xi: &[f64]) -> Option<Vec<Vec<f64>>> {
        let a = self.noise_matrix();
        let ax = [
            a[0][0] * xi[0] + a[0][1] * xi[1],
            a[1][0] * xi[0] + a[1][1] * xi[1],
        ];
        let mut cov = vec![vec![0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] = ax[i] * ax[j] / 12.0;
            }
        }
        Some(cov)
    }
}
