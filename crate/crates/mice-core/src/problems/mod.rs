//! The pluggable stochastic-problem contract and built-in test problems.
//!
//! A problem exposes coupled gradient evaluation: evaluating at two design
//! points with the *same* [`RandomEvent`] yields the pair needed for a
//! difference sample. Problems whose randomness depends on the design point
//! must apply the mapping internally so the event distribution stays fixed.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::rng::RngStream;

mod finite_quadratic;
mod logistic;
mod quadratic;
mod rosenbrock;
mod shifted;

pub use finite_quadratic::{finite_quadratic_problem, two_point_quadratic, FiniteQuadratic};
pub use logistic::{logistic_problem, LogisticProblem};
pub use quadratic::{quadratic_problem, StochasticQuadratic};
pub use rosenbrock::{rosenbrock_problem, StochasticRosenbrock};
pub use shifted::{shifted_quadratic_problem, ShiftedQuadratic};

/// Whether the underlying randomness is a continuous distribution or a finite
/// data population of known size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    Infinite,
    Finite(usize),
}

impl Population {
    pub fn is_finite(self) -> bool {
        matches!(self, Population::Finite(_))
    }
}

/// An opaque, reusable handle for one realization of the problem randomness.
///
/// For infinite populations this stores the actual draw; for finite
/// populations it is a data index in `[0, N)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RandomEvent {
    Draw(Vec<f64>),
    Index(usize),
}

impl RandomEvent {
    pub fn index(&self) -> Option<usize> {
        match self {
            RandomEvent::Index(i) => Some(*i),
            RandomEvent::Draw(_) => None,
        }
    }
}

/// Smoothness and convexity constants of the mean objective.
#[derive(Debug, Clone, Copy)]
pub struct ProblemConstants {
    /// Lipschitz constant of the mean gradient.
    pub lipschitz: f64,
    /// Strong-convexity constant.
    pub strong_convexity: f64,
    /// Almost-sure (per-sample) gradient Lipschitz bound, when meaningful.
    pub lipschitz_as: Option<f64>,
}

impl ProblemConstants {
    pub fn condition_number(&self) -> f64 {
        self.lipschitz / self.strong_convexity
    }
}

/// The oracle contract consumed by estimators and optimizers.
///
/// `gradient` must be deterministic given `(xi, event)`; this coupling
/// guarantee is what makes gradient differences at shared events valid
/// control-variate samples. Optional capabilities (true gradient, optimum,
/// covariance) unlock analytic baselines and acceptance checks.
pub trait StochasticProblem {
    /// Design-space dimension.
    fn dim(&self) -> usize;

    fn population(&self) -> Population;

    /// Draw one event. For finite populations this is a uniform index; the
    /// estimator handles without-replacement draws itself.
    fn sample_event(&self, rng: &mut RngStream) -> RandomEvent;

    /// Gradient of the single-sample objective at `xi` under `event`.
    fn gradient(&self, xi: &[f64], event: &RandomEvent) -> Vec<f64>;

    /// Single-sample objective value, when available.
    fn objective(&self, _xi: &[f64], _event: &RandomEvent) -> Option<f64> {
        None
    }

    /// Exact mean gradient, when available.
    fn true_gradient(&self, _xi: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Exact mean objective, when available.
    fn true_objective(&self, _xi: &[f64]) -> Option<f64> {
        None
    }

    /// Analytic optimum `(xi*, F*)`, when available.
    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        None
    }

    fn constants(&self) -> Option<ProblemConstants> {
        None
    }

    /// Covariance of the single-sample gradient at `xi`, when available.
    fn gradient_covariance(&self, _xi: &[f64]) -> Option<Vec<Vec<f64>>> {
        None
    }
}

impl<P: StochasticProblem + ?Sized> StochasticProblem for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn population(&self) -> Population {
        (**self).population()
    }
    fn sample_event(&self, rng: &mut RngStream) -> RandomEvent {
        (**self).sample_event(rng)
    }
    fn gradient(&self, xi: &[f64], event: &RandomEvent) -> Vec<f64> {
        (**self).gradient(xi, event)
    }
    fn objective(&self, xi: &[f64], event: &RandomEvent) -> Option<f64> {
        (**self).objective(xi, event)
    }
    fn true_gradient(&self, xi: &[f64]) -> Option<Vec<f64>> {
        (**self).true_gradient(xi)
    }
    fn true_objective(&self, xi: &[f64]) -> Option<f64> {
        (**self).true_objective(xi)
    }
    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        (**self).optimum()
    }
    fn constants(&self) -> Option<ProblemConstants> {
        (**self).constants()
    }
    fn gradient_covariance(&self, xi: &[f64]) -> Option<Vec<Vec<f64>>> {
        (**self).gradient_covariance(xi)
    }
}

/// Instrumented decorator counting every gradient call. Used to assert the
/// estimator and optimizer cost accounting against ground truth.
pub struct CountingProblem<P> {
    inner: P,
    calls: AtomicU64,
}

impl<P: StochasticProblem> CountingProblem<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn gradient_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

impl<P: StochasticProblem> StochasticProblem for CountingProblem<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn population(&self) -> Population {
        self.inner.population()
    }
    fn sample_event(&self, rng: &mut RngStream) -> RandomEvent {
        self.inner.sample_event(rng)
    }
    fn gradient(&self, xi: &[f64], event: &RandomEvent) -> Vec<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.gradient(xi, event)
    }
    fn objective(&self, xi: &[f64], event: &RandomEvent) -> Option<f64> {
        self.inner.objective(xi, event)
    }
    fn true_gradient(&self, xi: &[f64]) -> Option<Vec<f64>> {
        self.inner.true_gradient(xi)
    }
    fn true_objective(&self, xi: &[f64]) -> Option<f64> {
        self.inner.true_objective(xi)
    }
    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        self.inner.optimum()
    }
    fn constants(&self) -> Option<ProblemConstants> {
        self.inner.constants()
    }
    fn gradient_covariance(&self, xi: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.inner.gradient_covariance(xi)
    }
}

/// Wrapper that replaces the stochastic gradient with the exact mean
/// gradient, turning any problem with a true gradient into a deterministic
/// one. Useful for checking that optimizers are estimator-agnostic.
pub struct DeterministicProblem<P>(pub P);

impl<P: StochasticProblem> StochasticProblem for DeterministicProblem<P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn population(&self) -> Population {
        self.0.population()
    }
    fn sample_event(&self, rng: &mut RngStream) -> RandomEvent {
        self.0.sample_event(rng)
    }
    fn gradient(&self, xi: &[f64], _event: &RandomEvent) -> Vec<f64> {
        self.0
            .true_gradient(xi)
            .expect("DeterministicProblem requires a true gradient")
    }
    fn true_gradient(&self, xi: &[f64]) -> Option<Vec<f64>> {
        self.0.true_gradient(xi)
    }
    fn true_objective(&self, xi: &[f64]) -> Option<f64> {
        self.0.true_objective(xi)
    }
    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        self.0.optimum()
    }
    fn constants(&self) -> Option<ProblemConstants> {
        self.0.constants()
    }
    fn gradient_covariance(&self, _xi: &[f64]) -> Option<Vec<Vec<f64>>> {
        let d = self.0.dim();
        Some(vec![vec![0.0; d]; d])
    }
}
