//! Hierarchy clipping: discarding a stale prefix of layers.
//!
//! Variant A compares the incremental work of all suffix hierarchies at the
//! current error target. A rebased suffix prices its new minimum layer as a
//! raw base built from scratch (weight 1, zero current samples) with the
//! raw-gradient variance at the newest iterate as proxy, since the layer's
//! accumulated difference samples cannot seed a raw base. Retained layers
//! keep their samples, so their cost is only the increment to target.
//! Variant B applies to finite populations only: it freezes the exact
//! prefix once a layer saturates the population.

use super::{
    incremental_work_for, optimal_allocation, AllocationBounds, Hierarchy, LayerBudget,
    LayerKind, MiceConfig,
};

/// Incremental cost of sampling the suffix starting at layer position
/// `start` up to its optimal targets, plus the per-layer aggregation charge.
fn suffix_cost(
    hierarchy: &Hierarchy,
    start: usize,
    raw_variance: f64,
    error_target: f64,
    cfg: &MiceConfig,
) -> f64 {
    let layers = hierarchy.layers();
    let mut budgets = Vec::new();
    for (pos, layer) in layers.iter().enumerate().skip(start) {
        if pos == start {
            match layer.kind() {
                // Rebased suffix: a fresh raw base priced with the raw
                // variance proxy; existing difference samples are sunk.
                LayerKind::Difference => budgets.push(LayerBudget {
                    variance: raw_variance,
                    cost_weight: 1.0,
                    current: 0,
                }),
                // No-clip candidate keeps the actual base and its samples.
                LayerKind::RawBase => budgets.push(LayerBudget {
                    variance: layer.variance(),
                    cost_weight: 1.0,
                    current: layer.samples(),
                }),
                // Frozen bases are exact and cost nothing to sample.
                LayerKind::FrozenBase => {}
            }
        } else {
            budgets.push(LayerBudget {
                variance: layer.variance(),
                cost_weight: layer.cost_weight() as f64,
                current: layer.samples(),
            });
        }
    }
    let targets = optimal_allocation(
        &budgets,
        hierarchy.population(),
        error_target,
        AllocationBounds::from(cfg),
    );
    incremental_work_for(&budgets, &targets, layers.len() - start, cfg.cost_aggr)
}

/// Choose the suffix hierarchy with the smallest projected incremental
/// work.
///
/// Returns `(iteration index of the best suffix's first layer, its projected
/// work)`. Ties keep the longest suffix (clipping is destructive).
pub fn clip_candidates_a(
    hierarchy: &Hierarchy,
    grad_norm_sq: f64,
    eps: f64,
    cfg: &MiceConfig,
) -> (usize, f64) {
    let error_target = eps * eps * grad_norm_sq;
    let raw_variance = hierarchy.raw_grad_agg().sample_variance_total();
    let mut best_pos = 0;
    let mut best_cost = f64::INFINITY;
    for start in 0..hierarchy.len() {
        let cost = suffix_cost(hierarchy, start, raw_variance, error_target, cfg);
        if cost < best_cost {
            best_cost = cost;
            best_pos = start;
        }
    }
    (hierarchy.layers()[best_pos].iter_index(), best_cost)
}

/// Variant B trigger: the highest layer whose target saturates a finite
/// population, if any. `targets` pairs iteration indices with sample
/// targets.
pub fn clip_b_level(targets: &[(usize, u64)], population_size: usize) -> Option<usize> {
    targets
        .iter()
        .filter(|(_, t)| *t == population_size as u64)
        .map(|(idx, _)| *idx)
        .max()
}
