//! Variance-reduced stochastic optimization built around a multi-iteration
//! control-variate mean-gradient estimator.
//!
//! The estimator maintains a hierarchy of gradient-difference layers over
//! past iterates, allocates samples optimally under a relative
//! statistical-error tolerance, and prunes itself by dropping, restarting,
//! and clipping. On top of it sit first-order optimizers (SGD and Adam
//! couplings, an idealized Gaussian-noise variant, and classical baselines),
//! built-in stochastic test problems with analytic ground truth, dataset
//! ingestion, and a benchmark harness.

pub mod data;
pub mod estimator;
pub mod harness;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod telemetry;
pub mod vecops;

pub use estimator::{
    mice_iteration, ClippingMode, EstimateReport, Hierarchy, HierarchyAction, LayerKind,
    LayerStats, MiceConfig, MiceError, WelfordAgg,
};
pub use optim::{RunOptions, RunOutcome, StepSchedule, StoppingRule, Termination};
pub use problems::{Population, RandomEvent, StochasticProblem};
pub use rng::RngStream;
pub use telemetry::RunRecord;
