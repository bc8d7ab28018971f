//! The multi-iteration gradient estimator.
//!
//! The estimator keeps a hierarchy of layers over past design points. Each
//! layer accumulates coupled gradient-difference samples against its
//! predecessor (the base layer holds raw gradients), so the telescoping sum
//! of layer means estimates the mean gradient at the newest point. Per
//! iteration the hierarchy is updated, pruned (drop / restart / clip), and
//! sampled until the estimated statistical error falls below the relative
//! tolerance.

use thiserror::Error;

mod allocation;
mod clipping;
mod decisions;
mod hierarchy;
mod iteration;
mod resampling;
mod welford;

pub use allocation::{incremental_work_for, optimal_allocation, AllocationBounds, LayerBudget};
pub use clipping::clip_candidates_a;
pub use decisions::{restart_cost_from, should_drop, should_restart};
pub use hierarchy::{Hierarchy, LayerKind, LayerStats, LayerTelemetry};
pub use iteration::mice_iteration;
pub use resampling::resample_norm;
pub use welford::{DimensionMismatch, WelfordAgg};

/// Hierarchy-management mode for discarding stale prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClippingMode {
    /// Never clip.
    #[default]
    None,
    /// Cost comparison over suffix hierarchies (any population).
    A,
    /// Freeze the prefix once a layer saturates a finite population.
    B,
}

/// All estimator tunables. `Default` gives the recommended settings: a
/// relative tolerance of 1, dropping favored at 0.5, neutral restarts, five
/// jackknife partitions at the fifth percentile, and minimum batch sizes of
/// 5 (regular) / 50 (restart).
#[derive(Debug, Clone, PartialEq)]
pub struct MiceConfig {
    /// Relative statistical tolerance on the gradient estimate.
    pub eps: f64,
    /// Slack favoring dropping the previous iteration.
    pub delta_drop: f64,
    /// Slack favoring restarting the hierarchy.
    pub delta_rest: f64,
    /// Fraction of the iteration work budget spent on norm resampling.
    pub delta_re: f64,
    /// Number of jackknife partitions per layer.
    pub n_part: usize,
    /// Percentile (in (0, 100)) of resampled norms used for sizing.
    pub p_re: f64,
    /// Minimum number of jackknife resamples.
    pub min_resample: u64,
    /// Minimum samples per layer.
    pub m_min: u64,
    /// Fresh raw samples seeded on restart.
    pub m_min_restart: u64,
    /// Forced-restart threshold on the hierarchy length.
    pub max_hierarchy_size: usize,
    /// Hard cap on per-layer sample counts.
    pub max_layer_samples: u64,
    pub clipping: ClippingMode,
    /// Cost of one jackknife resample per layer, in gradient evaluations.
    pub cost_ratio_samp: f64,
    /// Cost of aggregating one layer, in gradient evaluations.
    pub cost_aggr: f64,
    /// Floor on the squared gradient-norm estimate; hitting it signals
    /// convergence (`ZeroNorm`).
    pub norm_floor: f64,
}

impl Default for MiceConfig {
    fn default() -> Self {
        Self {
            eps: 1.0,
            delta_drop: 0.5,
            delta_rest: 0.0,
            delta_re: 1.0,
            n_part: 5,
            p_re: 5.0,
            min_resample: 10,
            m_min: 5,
            m_min_restart: 50,
            max_hierarchy_size: 100,
            max_layer_samples: 10_000_000,
            clipping: ClippingMode::None,
            cost_ratio_samp: 0.01,
            cost_aggr: 0.0,
            norm_floor: 1e-28,
        }
    }
}

impl MiceConfig {
    pub fn with_eps(eps: f64) -> Self {
        Self {
            eps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MiceError> {
        let checks: [(bool, &str); 13] = [
            (self.eps > 0.0, "eps must be positive"),
            (self.delta_drop >= 0.0, "delta_drop must be nonnegative"),
            (self.delta_rest >= 0.0, "delta_rest must be nonnegative"),
            (self.delta_re >= 0.0, "delta_re must be nonnegative"),
            (self.n_part >= 2, "n_part must be at least 2"),
            (
                self.p_re > 0.0 && self.p_re < 100.0,
                "p_re must lie in (0, 100)",
            ),
            (self.min_resample >= 1, "min_resample must be at least 1"),
            (self.m_min >= 1, "m_min must be at least 1"),
            (self.m_min_restart >= 1, "m_min_restart must be at least 1"),
            (
                self.max_hierarchy_size >= 1,
                "max_hierarchy_size must be at least 1",
            ),
            (
                self.max_layer_samples >= self.m_min,
                "max_layer_samples must be at least m_min",
            ),
            (self.cost_ratio_samp > 0.0, "cost_ratio_samp must be positive"),
            (
                self.cost_aggr >= 0.0 && self.norm_floor > 0.0,
                "cost_aggr must be nonnegative and norm_floor positive",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(MiceError::InvalidConfig(msg.into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MiceError {
    /// The gradient-norm estimate fell below the configured floor. Callers
    /// must treat this as a stopping signal, not a failure.
    #[error("gradient norm estimate below floor; stopping signal")]
    ZeroNorm,
    /// A layer has no samples to resample from.
    #[error("layer {layer} has no samples")]
    EmptyLayer { layer: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// What happened to the hierarchy this iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HierarchyAction {
    Regular,
    Dropped,
    Restarted,
    /// Clipped with the new base at the given iteration index.
    Clipped(usize),
}

impl std::fmt::Display for HierarchyAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HierarchyAction::Regular => write!(f, "regular"),
            HierarchyAction::Dropped => write!(f, "dropped"),
            HierarchyAction::Restarted => write!(f, "restarted"),
            HierarchyAction::Clipped(l) => write!(f, "clipped({l})"),
        }
    }
}

/// Per-iteration estimator output and telemetry.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    /// The mean-gradient estimate at the newest design point.
    pub gradient: Vec<f64>,
    /// Estimated squared statistical error of the estimate.
    pub stat_error_sq: f64,
    /// Conservative resampled norm used for sample sizing.
    pub resampled_norm: f64,
    pub action: HierarchyAction,
    /// Gradient evaluations spent in this call.
    pub new_gradient_evals: u64,
    pub per_layer: Vec<LayerTelemetry>,
    /// Set when a sample cap stopped the loop before the error target.
    pub cap_hit: bool,
}
