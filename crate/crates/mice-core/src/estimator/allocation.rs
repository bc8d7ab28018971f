//! Optimal per-layer sample counts under the relative statistical-error
//! constraint, and the incremental-work model.
//!
//! For an infinite population the closed form is
//! `M*_l = ceil( S * sqrt(V_l / w_l) / t )` with `S = sum_l sqrt(V_l w_l)`
//! and `t` the squared error target; for a finite population of size `N`
//! the without-replacement correction moves `sum V / (N - 1)` into the
//! denominator and scales by `N / (N - 1)`.

use super::{Hierarchy, LayerKind, MiceConfig, MiceError};
use crate::problems::Population;

/// Sizing inputs for one layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerBudget {
    /// Total-component variance estimate.
    pub variance: f64,
    /// Gradient evaluations per sample (1 for a base, 2 for a difference).
    pub cost_weight: f64,
    /// Samples already taken.
    pub current: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct AllocationBounds {
    pub m_min: u64,
    pub max_layer_samples: u64,
}

impl From<&MiceConfig> for AllocationBounds {
    fn from(cfg: &MiceConfig) -> Self {
        Self {
            m_min: cfg.m_min,
            max_layer_samples: cfg.max_layer_samples,
        }
    }
}

fn ceil_to_count(x: f64) -> u64 {
    if !x.is_finite() {
        return u64::MAX;
    }
    if x <= 0.0 {
        0
    } else {
        x.ceil() as u64
    }
}

/// Closed-form sample targets for the given layer budgets. `error_target`
/// is the allowed squared statistical error (tolerance squared times the
/// squared gradient norm). Targets are clamped below by `m_min` and the
/// current count, and above by the population size and the hard cap.
pub fn optimal_allocation(
    budgets: &[LayerBudget],
    population: Population,
    error_target: f64,
    bounds: AllocationBounds,
) -> Vec<u64> {
    let weighted_sum: f64 = budgets
        .iter()
        .map(|b| (b.variance * b.cost_weight).sqrt())
        .sum();
    let variance_sum: f64 = budgets.iter().map(|b| b.variance).sum();
    budgets
        .iter()
        .map(|b| {
            let shape = (b.variance / b.cost_weight).sqrt();
            let raw = match population {
                Population::Infinite => weighted_sum * shape / error_target,
                Population::Finite(n) if n <= 1 => 1.0,
                Population::Finite(n) => {
                    let nf = n as f64;
                    let denom = error_target + variance_sum / (nf - 1.0);
                    nf / (nf - 1.0) * weighted_sum * shape / denom
                }
            };
            let mut target = ceil_to_count(raw).max(bounds.m_min).max(b.current);
            let mut cap = bounds.max_layer_samples;
            if let Population::Finite(n) = population {
                cap = cap.min(n as u64);
            }
            target = target.min(cap);
            target
        })
        .collect()
}

/// Work to raise layer counts from `current` to `targets`, in units of one
/// gradient evaluation: `sum_l w_l (M*_l - M_l) + |layers| C_aggr`.
pub fn incremental_work_for(
    budgets: &[LayerBudget],
    targets: &[u64],
    layer_count: usize,
    cost_aggr: f64,
) -> f64 {
    let sampling: f64 = budgets
        .iter()
        .zip(targets)
        .map(|(b, &t)| b.cost_weight * t.saturating_sub(b.current) as f64)
        .sum();
    sampling + layer_count as f64 * cost_aggr
}

impl Hierarchy {
    /// Budgets for every non-frozen layer, in layer order, paired with the
    /// layer's position in the hierarchy.
    pub(crate) fn budgets(&self) -> (Vec<usize>, Vec<LayerBudget>) {
        let mut positions = Vec::new();
        let mut budgets = Vec::new();
        for (pos, layer) in self.layers().iter().enumerate() {
            if layer.kind() == LayerKind::FrozenBase {
                continue;
            }
            positions.push(pos);
            budgets.push(LayerBudget {
                variance: layer.variance(),
                cost_weight: layer.cost_weight() as f64,
                current: layer.samples(),
            });
        }
        (positions, budgets)
    }

    /// Optimal sample sizes for the current hierarchy, as
    /// `(iteration index, target)` pairs over non-frozen layers.
    ///
    /// Returns `ZeroNorm` when the squared norm estimate sits below the
    /// configured floor; callers treat that as a stopping signal.
    pub fn optimal_sample_sizes(
        &self,
        grad_norm_sq: f64,
        eps: f64,
        cfg: &MiceConfig,
    ) -> Result<Vec<(usize, u64)>, MiceError> {
        if grad_norm_sq < cfg.norm_floor {
            return Err(MiceError::ZeroNorm);
        }
        let (positions, budgets) = self.budgets();
        let targets = optimal_allocation(
            &budgets,
            self.population(),
            eps * eps * grad_norm_sq,
            AllocationBounds::from(cfg),
        );
        Ok(positions
            .iter()
            .map(|&p| self.layers()[p].iter_index())
            .zip(targets)
            .collect())
    }

    /// Work to reach `targets` (as returned by `optimal_sample_sizes`) from
    /// the current state, including the aggregation term for every layer.
    pub fn incremental_work(&self, targets: &[(usize, u64)], cfg: &MiceConfig) -> f64 {
        let (positions, budgets) = self.budgets();
        debug_assert_eq!(positions.len(), targets.len());
        let target_counts: Vec<u64> = targets.iter().map(|(_, t)| *t).collect();
        incremental_work_for(&budgets, &target_counts, self.len(), cfg.cost_aggr)
    }
}
