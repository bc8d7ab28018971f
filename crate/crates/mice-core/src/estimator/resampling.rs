//! Jackknife resampling of the mean-gradient norm.
//!
//! Sample sizing needs the unknown true gradient norm. The estimate's own
//! norm is biased upward by noise, so instead we form leave-one-partition-out
//! re-estimates per layer, combine them across layers with independently
//! drawn partition picks, and take a low percentile of the resulting norms.
//! Underestimating the norm only makes sizing more conservative.

use super::{Hierarchy, LayerKind, MiceConfig, MiceError};
use crate::rng::RngStream;
use crate::vecops;

/// Memory guard on the number of jackknife draws for pathologically large
/// work hints; far beyond what a percentile estimate needs.
const MAX_RESAMPLES: u64 = 2_000_000;

/// Complement means for one layer: entry `i` is the mean over all samples
/// outside partition `i`. Degenerate complements (all mass in one partition)
/// fall back to the full layer mean.
fn complement_means(
    layer: &super::LayerStats,
    hierarchy_pos: usize,
) -> Result<Vec<Vec<f64>>, MiceError> {
    let total_count = layer.samples();
    if total_count == 0 {
        return Err(MiceError::EmptyLayer {
            layer: hierarchy_pos,
        });
    }
    let full_mean = layer.mean();
    let dim = full_mean.len();
    let total_sum: Vec<f64> = full_mean.iter().map(|m| m * total_count as f64).collect();
    let mut out = Vec::with_capacity(layer.partitions().len());
    for part in layer.partitions() {
        let rest = total_count - part.count();
        if rest == 0 {
            out.push(full_mean.to_vec());
            continue;
        }
        let mut mean = vec![0.0; dim];
        for ((m, &ts), &pm) in mean.iter_mut().zip(&total_sum).zip(part.mean()) {
            *m = (ts - pm * part.count() as f64) / rest as f64;
        }
        out.push(mean);
    }
    Ok(out)
}

/// Conservative norm estimate of the current mean-gradient estimate.
///
/// Draws `n_samp = max(min_resample, floor(delta_re * budget_hint /
/// (cost_ratio_samp * |layers|)))` jackknife estimates; each sums one
/// uniformly chosen partition-complement mean per layer plus any frozen
/// vector, and the norm at ascending rank `max(1, floor(n_samp * p_re /
/// 100))` is returned.
pub fn resample_norm(
    hierarchy: &Hierarchy,
    cfg: &MiceConfig,
    budget_hint: f64,
    rng: &mut RngStream,
) -> Result<f64, MiceError> {
    let layer_count = hierarchy.len().max(1);
    let budget = (cfg.delta_re * budget_hint / (cfg.cost_ratio_samp * layer_count as f64)).floor();
    let n_samp = if budget.is_finite() && budget >= 0.0 {
        (budget as u64).max(cfg.min_resample).min(MAX_RESAMPLES)
    } else {
        MAX_RESAMPLES
    };

    let mut frozen = vec![0.0; hierarchy.dim()];
    let mut complements: Vec<Vec<Vec<f64>>> = Vec::new();
    for (pos, layer) in hierarchy.layers().iter().enumerate() {
        if layer.kind() == LayerKind::FrozenBase {
            vecops::axpy(1.0, layer.mean(), &mut frozen);
        } else {
            complements.push(complement_means(layer, pos)?);
        }
    }

    let mut norms = Vec::with_capacity(n_samp as usize);
    let mut estimate = vec![0.0; hierarchy.dim()];
    for _ in 0..n_samp {
        estimate.copy_from_slice(&frozen);
        for layer_complements in &complements {
            let pick = rng.index(layer_complements.len());
            vecops::axpy(1.0, &layer_complements[pick], &mut estimate);
        }
        norms.push(vecops::norm(&estimate));
    }

    let rank = ((n_samp as f64 * cfg.p_re / 100.0).floor() as usize).max(1);
    let idx = rank - 1;
    let (_, picked, _) = norms.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    Ok(*picked)
}
