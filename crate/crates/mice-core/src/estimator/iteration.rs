//! The per-iteration estimation procedure.
//!
//! Order of operations per call: append a layer for the new design point
//! with a small probe batch (building the keep and drop pairings from shared
//! events), decide dropping, resample the gradient norm, decide restarting,
//! apply clipping, then grow every layer to its optimal sample target until
//! the estimated statistical error meets the relative tolerance.

use super::clipping::{clip_b_level, clip_candidates_a};
use super::decisions::should_drop;
use super::{
    resample_norm, ClippingMode, EstimateReport, Hierarchy, HierarchyAction, LayerKind,
    LayerStats, MiceConfig, MiceError,
};
use crate::problems::{Population, StochasticProblem};
use crate::rng::RngStream;
use crate::vecops;

/// Grow layer `pos` by `add` fresh coupled samples. Returns gradient
/// evaluations spent. Raw gradients observed at iteration `current_k` also
/// feed the restart-cost aggregate.
fn grow_layer<P: StochasticProblem>(
    h: &mut Hierarchy,
    pos: usize,
    add: u64,
    current_k: usize,
    problem: &P,
    rng: &mut RngStream,
) -> u64 {
    if add == 0 {
        return 0;
    }
    let (own_idx, prev_idx) = {
        let layer = &h.layers()[pos];
        debug_assert!(layer.kind() != LayerKind::FrozenBase);
        (layer.iter_index(), layer.prev_index())
    };
    let xi_own = h.design_point(own_idx).to_vec();
    let xi_prev = prev_idx.map(|p| h.design_point(p).to_vec());
    let mut evals = 0;
    for _ in 0..add {
        let event = match h.layers_mut()[pos].draw_event(problem, rng) {
            Some(e) => e,
            None => break,
        };
        let g_own = problem.gradient(&xi_own, &event);
        evals += 1;
        let sample = match &xi_prev {
            Some(xp) => {
                let g_prev = problem.gradient(xp, &event);
                evals += 1;
                vecops::sub(&g_own, &g_prev)
            }
            None => g_own.clone(),
        };
        if own_idx == current_k {
            h.raw_grad_agg_mut().update(&g_own);
        }
        h.layers_mut()[pos].push_sample(&sample);
    }
    evals
}

/// Discard everything and rebuild a raw base at the newest iterate.
fn do_restart<P: StochasticProblem>(
    h: &mut Hierarchy,
    k: usize,
    xi_k: &[f64],
    seed: u64,
    cfg: &MiceConfig,
    problem: &P,
    rng: &mut RngStream,
) -> u64 {
    h.clear();
    h.insert_design_point(k, xi_k.to_vec());
    h.push_layer(LayerStats::raw_base(k, h.dim(), cfg.n_part, h.population()));
    grow_layer(h, 0, seed, k, problem, rng)
}

/// Sample variance with floating-point dust snapped to an exact zero: a
/// variance below squared-ulp scale of the layer mean is indistinguishable
/// from perfect coupling, and the drop rule's zero-variance convention must
/// apply to it.
fn effective_variance(layer: &LayerStats) -> f64 {
    let v = layer.variance();
    if v <= 1e-24 * vecops::norm_sq(layer.mean()) {
        0.0
    } else {
        v
    }
}

/// Append the layer for iteration `k`, probing both the regular pairing
/// (against the current top) and the skip pairing (against the
/// grand-previous) from shared events, then commit the drop decision.
/// The base layer is never dropped.
fn probe_and_append<P: StochasticProblem>(
    h: &mut Hierarchy,
    k: usize,
    xi_k: &[f64],
    cfg: &MiceConfig,
    problem: &P,
    rng: &mut RngStream,
) -> (u64, bool) {
    let (prev_idx, grand_idx, v_prev) = {
        let top = h.layers().last().expect("nonempty hierarchy");
        (top.iter_index(), top.prev_index(), effective_variance(top))
    };
    let xi_prev = h.design_point(prev_idx).to_vec();
    let xi_grand = grand_idx.map(|g| h.design_point(g).to_vec());
    let dim = h.dim();
    let pop = h.population();

    let mut cand_keep = LayerStats::difference(k, prev_idx, dim, cfg.n_part, pop);
    let mut cand_skip =
        grand_idx.map(|g| LayerStats::difference(k, g, dim, cfg.n_part, Population::Infinite));
    let mut evals = 0;
    for _ in 0..cfg.m_min {
        let event = match cand_keep.draw_event(problem, rng) {
            Some(e) => e,
            None => break,
        };
        let g_k = problem.gradient(xi_k, &event);
        evals += 1;
        let g_prev = problem.gradient(&xi_prev, &event);
        evals += 1;
        h.raw_grad_agg_mut().update(&g_k);
        if let (Some(cand), Some(xg)) = (cand_skip.as_mut(), xi_grand.as_ref()) {
            let g_grand = problem.gradient(xg, &event);
            evals += 1;
            cand.push_sample(&vecops::sub(&g_k, &g_grand));
        }
        cand_keep.push_sample(&vecops::sub(&g_k, &g_prev));
    }

    let drop_prev = match &cand_skip {
        Some(cand) => should_drop(
            effective_variance(cand),
            v_prev,
            effective_variance(&cand_keep),
            cfg.delta_drop,
        ),
        None => false,
    };
    if drop_prev {
        let pool = cand_keep.take_pool();
        let mut winner = cand_skip.expect("skip candidate exists when dropping");
        winner.set_pool(pool);
        h.pop_layer();
        h.push_layer(winner);
    } else {
        h.push_layer(cand_keep);
    }
    (evals, drop_prev)
}

/// Work estimate used to size the resampling pass, derived from the current
/// estimate's own norm. A hint only; the definitive norm comes from the
/// resampling itself.
fn budget_hint(h: &Hierarchy, cfg: &MiceConfig) -> f64 {
    let norm_sq = vecops::norm_sq(&h.estimate()).max(cfg.norm_floor);
    match h.optimal_sample_sizes(norm_sq, cfg.eps, cfg) {
        Ok(targets) => h.incremental_work(&targets, cfg).max(1.0),
        Err(_) => 1.0,
    }
}

fn refreshed_norm(
    h: &Hierarchy,
    cfg: &MiceConfig,
    rng: &mut RngStream,
) -> Result<f64, MiceError> {
    let norm = resample_norm(h, cfg, budget_hint(h, cfg), rng)?;
    if norm * norm < cfg.norm_floor {
        return Err(MiceError::ZeroNorm);
    }
    Ok(norm)
}

/// One estimator update at design point `xi_k`.
///
/// Returns the gradient estimate with telemetry, or `ZeroNorm` as a stopping
/// signal when the resampled gradient norm vanishes. Every gradient call on
/// `problem` is counted exactly once in `new_gradient_evals`.
pub fn mice_iteration<P: StochasticProblem>(
    h: &mut Hierarchy,
    problem: &P,
    xi_k: &[f64],
    cfg: &MiceConfig,
    rng: &mut RngStream,
) -> Result<EstimateReport, MiceError> {
    assert_eq!(xi_k.len(), h.dim(), "design point dimension");
    let k = h.advance_index();
    h.insert_design_point(k, xi_k.to_vec());
    h.reset_raw_grad_agg();
    let mut evals = 0u64;
    let mut action = HierarchyAction::Regular;

    if h.is_empty() {
        h.push_layer(LayerStats::raw_base(k, h.dim(), cfg.n_part, h.population()));
        evals += grow_layer(h, 0, cfg.m_min, k, problem, rng);
    } else {
        let (probe_evals, dropped) = probe_and_append(h, k, xi_k, cfg, problem, rng);
        evals += probe_evals;
        if dropped {
            action = HierarchyAction::Dropped;
        }
    }

    if h.len() > cfg.max_hierarchy_size {
        evals += do_restart(h, k, xi_k, cfg.m_min_restart, cfg, problem, rng);
        action = HierarchyAction::Restarted;
    }

    let mut norm_re = refreshed_norm(h, cfg, rng)?;

    // Restart when rebuilding from scratch is as cheap as updating.
    if h.len() > 1 {
        let targets = h.optimal_sample_sizes(norm_re * norm_re, cfg.eps, cfg)?;
        let delta_w = h.incremental_work(&targets, cfg);
        let rest = h.restart_cost(norm_re * norm_re, cfg.eps, cfg)?;
        if delta_w > 0.0 && super::should_restart(rest, delta_w, cfg.delta_rest) {
            evals += do_restart(h, k, xi_k, cfg.m_min_restart, cfg, problem, rng);
            action = HierarchyAction::Restarted;
            norm_re = refreshed_norm(h, cfg, rng)?;
        }
    }

    match cfg.clipping {
        ClippingMode::None => {}
        ClippingMode::A => {
            if h.len() >= 2 {
                let (level, _) = clip_candidates_a(h, norm_re * norm_re, cfg.eps, cfg);
                let pos = h
                    .layers()
                    .iter()
                    .position(|l| l.iter_index() == level)
                    .expect("clip level exists");
                if pos > 0 {
                    h.rebase_at(pos, cfg.n_part);
                    evals += grow_layer(h, 0, cfg.m_min, k, problem, rng);
                    if action != HierarchyAction::Restarted {
                        action = HierarchyAction::Clipped(level);
                    }
                    norm_re = refreshed_norm(h, cfg, rng)?;
                }
            }
        }
        ClippingMode::B => {
            if let Population::Finite(n) = h.population() {
                let targets = h.optimal_sample_sizes(norm_re * norm_re, cfg.eps, cfg)?;
                if let Some(level) = clip_b_level(&targets, n) {
                    let pos = h
                        .layers()
                        .iter()
                        .position(|l| l.iter_index() == level)
                        .expect("clip level exists");
                    // Complete every layer up to the clip level so the
                    // frozen base is the exact partial telescoping sum.
                    for p in 0..=pos {
                        if h.layers()[p].kind() == LayerKind::FrozenBase {
                            continue;
                        }
                        let deficit = n as u64 - h.layers()[p].samples();
                        evals += grow_layer(h, p, deficit, k, problem, rng);
                    }
                    let mut frozen = vec![0.0; h.dim()];
                    for p in 0..=pos {
                        vecops::axpy(1.0, h.layers()[p].mean(), &mut frozen);
                    }
                    h.collapse_prefix_to_frozen(pos, frozen);
                    if action != HierarchyAction::Restarted {
                        action = HierarchyAction::Clipped(level);
                    }
                    norm_re = refreshed_norm(h, cfg, rng)?;
                }
            }
        }
    }

    // Grow layers until the statistical error meets the tolerance or every
    // target is capped.
    let tolerance = cfg.eps * cfg.eps * norm_re * norm_re;
    let mut cap_hit = false;
    loop {
        if h.stat_error_sq() <= tolerance {
            break;
        }
        let targets = h.optimal_sample_sizes(norm_re * norm_re, cfg.eps, cfg)?;
        let mut grew = false;
        for (index, target) in targets {
            let pos = h
                .layers()
                .iter()
                .position(|l| l.iter_index() == index)
                .expect("target layer exists");
            let current = h.layers()[pos].samples();
            if target > current {
                grew = true;
                evals += grow_layer(h, pos, target - current, k, problem, rng);
            }
        }
        if !grew {
            cap_hit = true;
            break;
        }
    }

    Ok(EstimateReport {
        gradient: h.estimate(),
        stat_error_sq: h.stat_error_sq(),
        resampled_norm: norm_re,
        action,
        new_gradient_evals: evals,
        per_layer: h.telemetry(),
        cap_hit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{
        quadratic_problem, shifted_quadratic_problem, two_point_quadratic, CountingProblem,
    };

    #[test]
    fn initial_iteration_builds_raw_base() {
        let problem = quadratic_problem(10.0);
        let mut h = Hierarchy::new(2, problem.population());
        let cfg = MiceConfig::default();
        let mut rng = RngStream::new(1, 0);
        let report = mice_iteration(&mut h, &problem, &[20.0, 50.0], &cfg, &mut rng).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.layers()[0].kind(), LayerKind::RawBase);
        assert_eq!(report.action, HierarchyAction::Regular);
        // The estimate is the mean of the base's raw samples.
        let mean = h.layers()[0].mean().to_vec();
        assert_eq!(report.gradient, mean);
        assert!(report.stat_error_sq <= cfg.eps * cfg.eps * report.resampled_norm.powi(2));
    }

    #[test]
    fn gradient_accounting_matches_instrumented_probe() {
        let problem = CountingProblem::new(quadratic_problem(100.0));
        let mut h = Hierarchy::new(2, problem.population());
        let cfg = MiceConfig::default();
        let mut rng = RngStream::new(3, 0);
        let mut xi = vec![20.0, 50.0];
        let mut reported = 0;
        for _ in 0..5 {
            let report = mice_iteration(&mut h, &problem, &xi, &cfg, &mut rng).unwrap();
            reported += report.new_gradient_evals;
            for (x, g) in xi.iter_mut().zip(&report.gradient) {
                *x -= 0.005 * g;
            }
        }
        assert_eq!(reported, problem.gradient_calls());
    }

    #[test]
    fn identical_seeds_give_identical_reports() {
        let problem = quadratic_problem(100.0);
        let cfg = MiceConfig::default();
        let run = |seed| {
            let mut h = Hierarchy::new(2, problem.population());
            let mut rng = RngStream::new(seed, 9);
            let mut xi = vec![20.0, 50.0];
            let mut all = Vec::new();
            for _ in 0..4 {
                let report = mice_iteration(&mut h, &problem, &xi, &cfg, &mut rng).unwrap();
                for (x, g) in xi.iter_mut().zip(&report.gradient) {
                    *x -= 0.01 * g;
                }
                all.push(report);
            }
            all
        };
        let a = run(77);
        let b = run(77);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.gradient, rb.gradient);
            assert_eq!(ra.new_gradient_evals, rb.new_gradient_evals);
            assert_eq!(ra.stat_error_sq.to_bits(), rb.stat_error_sq.to_bits());
            assert_eq!(ra.resampled_norm.to_bits(), rb.resampled_norm.to_bits());
        }
        let c = run(78);
        assert_ne!(a[0].gradient, c[0].gradient);
    }

    // Perfectly correlated gradients: difference layers are deterministic,
    // every intermediate iteration is dropped, and non-base layers stay at
    // the minimum batch size.
    #[test]
    fn shifted_quadratic_drops_every_intermediate_iteration() {
        let problem = shifted_quadratic_problem(0.1);
        let mut h = Hierarchy::new(2, problem.population());
        let cfg = MiceConfig::default();
        let mut rng = RngStream::new(5, 0);
        let mut xi = vec![20.0, 50.0];
        let eta = {
            let c = problem.constants().unwrap();
            2.0 / ((c.lipschitz + c.strong_convexity) * 2.0)
        };
        for k in 0..12 {
            let report = mice_iteration(&mut h, &problem, &xi, &cfg, &mut rng).unwrap();
            if k >= 2 {
                assert_eq!(report.action, HierarchyAction::Dropped, "iteration {k}");
                assert_eq!(h.len(), 2);
            }
            for layer in h.layers().iter().skip(1) {
                assert_eq!(layer.samples(), cfg.m_min, "iteration {k}");
            }
            for (x, g) in xi.iter_mut().zip(&report.gradient) {
                *x -= eta * g;
            }
        }
    }

    #[test]
    fn finite_population_saturates_to_exact_gradient() {
        let problem = two_point_quadratic();
        let mut h = Hierarchy::new(2, problem.population());
        let cfg = MiceConfig {
            eps: 1e-9,
            ..MiceConfig::default()
        };
        let mut rng = RngStream::new(11, 0);
        let xi = vec![2.0, -1.0];
        let report = mice_iteration(&mut h, &problem, &xi, &cfg, &mut rng).unwrap();
        let exact = problem.true_gradient(&xi).unwrap();
        for (a, b) in report.gradient.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
        assert_eq!(report.stat_error_sq, 0.0);
    }
}
