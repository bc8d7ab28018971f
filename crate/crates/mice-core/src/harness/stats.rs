//! Rate oracles and curve statistics for the benchmark harness.

use std::collections::HashMap;

use super::HarnessError;
use crate::rng::RngStream;
use crate::telemetry::RunRecord;

/// Theoretical per-iteration contraction of the mean squared distance for
/// strongly convex SGD under relative gradient-error control:
/// `(((kappa-1)/(kappa+1))^2 + eps^2) / (1 + eps^2)`.
pub fn theory_rate(kappa: f64, eps: f64) -> f64 {
    assert!(kappa >= 1.0, "kappa must be at least 1");
    assert!(eps >= 0.0, "eps must be nonnegative");
    let rho = ((kappa - 1.0) / (kappa + 1.0)).powi(2);
    (rho + eps * eps) / (1.0 + eps * eps)
}

/// Least-squares slope in log-log coordinates. Nonpositive points are
/// excluded; at least ten usable points are required.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64, HarnessError> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 10 {
        return Err(HarnessError::DegenerateWindow(format!(
            "{} usable points, need at least 10",
            logs.len()
        )));
    }
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mean_x) * (x - mean_x)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::DegenerateWindow(
            "window has no spread in the x coordinate".into(),
        ));
    }
    let sxy: f64 = logs
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    Ok(sxy / sxx)
}

/// Ordinary least-squares slope of `y` against `x` (linear coordinates).
pub fn fit_linear_slope(points: &[(f64, f64)]) -> Result<f64, HarnessError> {
    if points.len() < 2 {
        return Err(HarnessError::DegenerateWindow("need two points".into()));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = points
        .iter()
        .map(|(x, _)| (x - mean_x) * (x - mean_x))
        .sum();
    if sxx == 0.0 {
        return Err(HarnessError::DegenerateWindow("no spread in x".into()));
    }
    let sxy: f64 = points
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    Ok(sxy / sxx)
}

/// Recompute the sampling-cost functional from per-layer telemetry: per
/// record, weighted sample growth relative to the previous record, with
/// newly appearing layers counted from zero. Probe evaluations and work
/// discarded by drops or restarts are invisible here, so an instrumented
/// evaluation counter is always at least this value.
pub fn total_sampling_cost(records: &[RunRecord]) -> u64 {
    let mut total = 0u64;
    let mut previous: HashMap<usize, u64> = HashMap::new();
    for record in records {
        let mut current = HashMap::with_capacity(record.per_layer.len());
        for layer in &record.per_layer {
            let before = previous.get(&layer.index).copied().unwrap_or(0);
            total += layer.cost_weight as u64 * layer.samples.saturating_sub(before);
            current.insert(layer.index, layer.samples);
        }
        previous = current;
    }
    total
}

/// Percentile of a sample by nearest-rank on the sorted values.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    assert!(!sorted.is_empty());
    let idx = ((pct / 100.0) * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Bootstrap band for the mean of `values`: resamples with replacement
/// `reps` times and returns the `(lo_pct, hi_pct)` percentiles of the
/// resampled means. Deterministic for a fixed `rng` state.
pub fn bootstrap_mean_band(
    values: &[f64],
    reps: u32,
    lo_pct: f64,
    hi_pct: f64,
    rng: &mut RngStream,
) -> (f64, f64) {
    assert!(!values.is_empty());
    let mut means = Vec::with_capacity(reps as usize);
    for _ in 0..reps {
        let mut sum = 0.0;
        for _ in 0..values.len() {
            sum += values[rng.index(values.len())];
        }
        means.push(sum / values.len() as f64);
    }
    means.sort_by(|a, b| a.total_cmp(b));
    (percentile(&means, lo_pct), percentile(&means, hi_pct))
}
