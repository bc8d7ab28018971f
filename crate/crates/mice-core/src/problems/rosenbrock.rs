//! Stochastic adaptation of the Rosenbrock function: Gaussian perturbations
//! enter both the linear and the quadratic coupling terms, while the mean
//! gradient coincides with the deterministic Rosenbrock gradient.

use std::collections::HashMap;
use std::sync::Mutex;

use rand_distr::{Distribution, Normal};

use super::{Population, RandomEvent, StochasticProblem};
use crate::rng::RngStream;

const A: f64 = 1.0;
const B: f64 = 100.0;

pub struct StochasticRosenbrock {
    sigma: f64,
    covariance_cache: Mutex<HashMap<(u64, u64), Vec<Vec<f64>>>>,
}

/// `f(xi, t) = (a - xi0 + t0)^2 + b (-xi0^2 + xi1 + t0^2 - t1^2)^2` with
/// `t0, t1 ~ N(0, sigma^2)`, `a = 1`, `b = 100`.
pub fn rosenbrock_problem(sigma: f64) -> StochasticRosenbrock {
    assert!(sigma > 0.0, "sigma must be positive");
    StochasticRosenbrock {
        sigma,
        covariance_cache: Mutex::new(HashMap::new()),
    }
}

impl StochasticProblem for StochasticRosenbrock {
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
            RandomEvent::Index(_) => panic!("rosenbrock problem uses continuous events"),
        };
        let inner = xi[0] * xi[0] - xi[1] - t0 * t0 + t1 * t1;
        vec![
            -2.0 * A + 4.0 * B * xi[0] * inner + 2.0 * xi[0] - 2.0 * t0,
            2.0 * B * (-inner),
        ]
    }

    fn objective(&self, xi: &[f64], event: &RandomEvent) -> Option<f64> {
        let (t0, t1) = match event {
            RandomEvent::Draw(d) => (d[0], d[1]),
            RandomEvent::Index(_) => return None,
        };
        let quad = -xi[0] * xi[0] + xi[1] + t0 * t0 - t1 * t1;
        Some((A - xi[0] + t0).powi(2) + B * quad * quad)
    }

    fn true_gradient(&self, xi: &[f64]) -> Option<Vec<f64>> {
        Some(vec![
            -2.0 * A + 4.0 * B * xi[0].powi(3) - 4.0 * B * xi[0] * xi[1] + 2.0 * xi[0],
            -2.0 * B * xi[0] * xi[0] + 2.0 * B * xi[1],
        ])
    }

    fn true_objective(&self, xi: &[f64]) -> Option<f64> {
        let s2 = self.sigma * self.sigma;
        Some(
            (A - xi[0]).powi(2)
                + s2
                + B * (4.0 * s2 * s2 + (xi[1] - xi[0] * xi[0]).powi(2)),
        )
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        let xi = vec![A, A * A];
        let f = self.true_objective(&xi)?;
        Some((xi, f))
    }

    /// No closed form; estimated by Monte Carlo with 10^4 draws and cached
    /// per design point.
    fn gradient_covariance(&self, xi: &[f64]) -> Option<Vec<Vec<f64>>> {
        let key = (xi[0].to_bits(), xi[1].to_bits());
        if let Some(cov) = self.covariance_cache.lock().unwrap().get(&key) {
            return Some(cov.clone());
        }
        let draws = 10_000;
        let mut rng = RngStream::new(0x6f73_656e, key.0 ^ key.1.rotate_left(17));
        let g_bar = self.true_gradient(xi)?;
        let mut cov = vec![vec![0.0; 2]; 2];
        for _ in 0..draws {
            let e = self.sample_event(&mut rng);
            let g = self.gradient(xi, &e);
            let d = [g[0] - g_bar[0], g[1] - g_bar[1]];
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += d[i] * d[j] / draws as f64;
                }
            }
        }
        self.covariance_cache
            .lock()
            .unwrap()
            .insert(key, cov.clone());
        Some(cov)
    }
}
