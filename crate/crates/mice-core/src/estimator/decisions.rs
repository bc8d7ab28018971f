//! Drop and restart decision rules. Both are pure functions of their numeric
//! inputs so the decision logic is testable as truth tables.

use super::{Hierarchy, MiceConfig, MiceError};

/// Whether re-pairing the newest layer with its grand-previous iterate is
/// cheaper than keeping the previous iterate in the hierarchy.
///
/// `v_bar` is the variance of differences against the grand-previous,
/// `v_prev` and `v_curr` the variances of the two consecutive pairings.
/// Dropping wins when `v_bar / (sqrt(v_prev) + sqrt(v_curr))^2 <= 1 + slack`.
/// With both pairing variances zero the coupling is perfect either way and
/// the shorter hierarchy is strictly cheaper, so the rule returns true.
pub fn should_drop(v_bar: f64, v_prev: f64, v_curr: f64, delta_drop: f64) -> bool {
    let denom = (v_prev.sqrt() + v_curr.sqrt()).powi(2);
    if denom == 0.0 {
        return true;
    }
    v_bar / denom <= 1.0 + delta_drop
}

/// Samples needed to rebuild the estimate from scratch at the newest
/// iterate: `ceil(V_raw / target)` floored at the restart minimum. `target`
/// is the allowed squared error.
pub fn restart_cost_from(raw_variance_total: f64, error_target: f64, m_min_restart: u64) -> f64 {
    let raw = if error_target > 0.0 {
        (raw_variance_total / error_target).ceil()
    } else {
        f64::INFINITY
    };
    raw.max(m_min_restart as f64)
}

/// Restart when rebuilding is no more expensive than updating:
/// `rest_cost / incremental_work <= 1 + slack`.
pub fn should_restart(rest_cost: f64, incremental_work: f64, delta_rest: f64) -> bool {
    debug_assert!(incremental_work > 0.0);
    rest_cost / incremental_work <= 1.0 + delta_rest
}

impl Hierarchy {
    /// Restart cost in gradient evaluations, from the raw-gradient variance
    /// at the newest iterate.
    pub fn restart_cost(
        &self,
        grad_norm_sq: f64,
        eps: f64,
        cfg: &MiceConfig,
    ) -> Result<f64, MiceError> {
        if grad_norm_sq < cfg.norm_floor {
            return Err(MiceError::ZeroNorm);
        }
        Ok(restart_cost_from(
            self.raw_grad_agg().sample_variance_total(),
            eps * eps * grad_norm_sq,
            cfg.m_min_restart,
        ))
    }
}
