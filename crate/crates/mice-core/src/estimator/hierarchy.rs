//! The layer hierarchy: one `LayerStats` per retained iteration plus the
//! bookkeeping needed to size, resample, and telescope them.

use std::collections::BTreeMap;

use super::WelfordAgg;
use crate::problems::{Population, RandomEvent, StochasticProblem};
use crate::rng::RngStream;
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Coupled gradient differences against the predecessor layer.
    Difference,
    /// Raw gradient samples at the layer's design point.
    RawBase,
    /// Exact stored vector; no samples, zero variance.
    FrozenBase,
}

/// Without-replacement index pool for finite populations. Draws are a
/// partial Fisher-Yates shuffle, so the used prefix is always a uniform
/// subset and cumulative across an iteration's growth.
#[derive(Debug, Clone)]
pub struct EventPool {
    indices: Vec<usize>,
    used: usize,
}

impl EventPool {
    pub fn new(population: usize) -> Self {
        Self {
            indices: (0..population).collect(),
            used: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.indices.len() - self.used
    }

    pub fn used(&self) -> &[usize] {
        &self.indices[..self.used]
    }

    pub fn draw(&mut self, rng: &mut RngStream) -> Option<usize> {
        if self.used == self.indices.len() {
            return None;
        }
        let j = self.used + rng.index(self.indices.len() - self.used);
        self.indices.swap(self.used, j);
        self.used += 1;
        Some(self.indices[self.used - 1])
    }
}

/// One hierarchy level: pairing of iterates plus partitioned sample
/// statistics. Samples are assigned to the `n_part` partitions round-robin,
/// so partition counts differ by at most one; the unpartitioned total is
/// kept alongside for O(1) mean and variance queries.
#[derive(Debug, Clone)]
pub struct LayerStats {
    iter_index: usize,
    prev_index: Option<usize>,
    kind: LayerKind,
    total: WelfordAgg,
    partitions: Vec<WelfordAgg>,
    cursor: usize,
    frozen_vector: Option<Vec<f64>>,
    pool: Option<EventPool>,
}

impl LayerStats {
    pub fn raw_base(iter_index: usize, dim: usize, n_part: usize, population: Population) -> Self {
        Self {
            iter_index,
            prev_index: None,
            kind: LayerKind::RawBase,
            total: WelfordAgg::new(dim),
            partitions: vec![WelfordAgg::new(dim); n_part],
            cursor: 0,
            frozen_vector: None,
            pool: pool_for(population),
        }
    }

    pub fn difference(
        iter_index: usize,
        prev_index: usize,
        dim: usize,
        n_part: usize,
        population: Population,
    ) -> Self {
        Self {
            iter_index,
            prev_index: Some(prev_index),
            kind: LayerKind::Difference,
            total: WelfordAgg::new(dim),
            partitions: vec![WelfordAgg::new(dim); n_part],
            cursor: 0,
            frozen_vector: None,
            pool: pool_for(population),
        }
    }

    pub fn frozen_base(iter_index: usize, vector: Vec<f64>) -> Self {
        let dim = vector.len();
        Self {
            iter_index,
            prev_index: None,
            kind: LayerKind::FrozenBase,
            total: WelfordAgg::new(dim),
            partitions: Vec::new(),
            cursor: 0,
            frozen_vector: Some(vector),
            pool: None,
        }
    }

    pub fn iter_index(&self) -> usize {
        self.iter_index
    }

    pub fn prev_index(&self) -> Option<usize> {
        self.prev_index
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn is_base(&self) -> bool {
        self.prev_index.is_none()
    }

    pub fn frozen_vector(&self) -> Option<&[f64]> {
        self.frozen_vector.as_deref()
    }

    /// Total sample count `M`.
    pub fn samples(&self) -> u64 {
        self.total.count()
    }

    /// Gradient evaluations per sample: 1 for bases, 2 for differences.
    pub fn cost_weight(&self) -> u8 {
        match self.kind {
            LayerKind::Difference => 2,
            LayerKind::RawBase | LayerKind::FrozenBase => 1,
        }
    }

    /// Total-component sample variance; zero for frozen bases and below two
    /// samples.
    pub fn variance(&self) -> f64 {
        match self.kind {
            LayerKind::FrozenBase => 0.0,
            _ => self.total.sample_variance_total(),
        }
    }

    /// The layer's contribution to the telescoped estimate.
    pub fn mean(&self) -> &[f64] {
        match &self.frozen_vector {
            Some(v) => v,
            None => self.total.mean(),
        }
    }

    pub fn partitions(&self) -> &[WelfordAgg] {
        &self.partitions
    }

    pub fn pool(&self) -> Option<&EventPool> {
        self.pool.as_ref()
    }

    pub fn push_sample(&mut self, sample: &[f64]) {
        debug_assert!(self.kind != LayerKind::FrozenBase);
        self.total.update(sample);
        self.partitions[self.cursor].update(sample);
        self.cursor = (self.cursor + 1) % self.partitions.len();
    }

    /// Draw one fresh event for this layer: a pool index for finite
    /// populations (None once exhausted), a problem draw otherwise.
    pub fn draw_event<P: StochasticProblem>(
        &mut self,
        problem: &P,
        rng: &mut RngStream,
    ) -> Option<RandomEvent> {
        match &mut self.pool {
            Some(pool) => pool.draw(rng).map(RandomEvent::Index),
            None => Some(problem.sample_event(rng)),
        }
    }

    // Candidate layers built during the probe phase share one event pool;
    // the winner takes it.
    pub(crate) fn take_pool(&mut self) -> Option<EventPool> {
        self.pool.take()
    }

    pub(crate) fn set_pool(&mut self, pool: Option<EventPool>) {
        self.pool = pool;
    }
}

fn pool_for(population: Population) -> Option<EventPool> {
    match population {
        Population::Finite(n) => Some(EventPool::new(n)),
        Population::Infinite => None,
    }
}

/// Stable per-layer telemetry names: `(index, samples, variance, weight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTelemetry {
    pub index: usize,
    pub samples: u64,
    pub variance: f64,
    pub cost_weight: u8,
}

/// Ordered set of layers with base-layer semantics, confined to one logical
/// optimization run.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    dim: usize,
    population: Population,
    layers: Vec<LayerStats>,
    design_points: BTreeMap<usize, Vec<f64>>,
    raw_grad_agg: WelfordAgg,
    next_index: usize,
}

impl Hierarchy {
    pub fn new(dim: usize, population: Population) -> Self {
        Self {
            dim,
            population,
            layers: Vec::new(),
            design_points: BTreeMap::new(),
            raw_grad_agg: WelfordAgg::new(dim),
            next_index: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn population(&self) -> Population {
        self.population
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> &[LayerStats] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerStats] {
        &mut self.layers
    }

    pub fn design_point(&self, index: usize) -> &[f64] {
        &self.design_points[&index]
    }

    /// Welford aggregate of raw gradients observed at the newest iterate;
    /// feeds the restart-cost estimate.
    pub fn raw_grad_agg(&self) -> &WelfordAgg {
        &self.raw_grad_agg
    }

    pub fn raw_grad_agg_mut(&mut self) -> &mut WelfordAgg {
        &mut self.raw_grad_agg
    }

    pub fn reset_raw_grad_agg(&mut self) {
        self.raw_grad_agg = WelfordAgg::new(self.dim);
    }

    pub fn next_index(&self) -> usize {
        self.next_index
    }

    pub fn advance_index(&mut self) -> usize {
        let k = self.next_index;
        self.next_index += 1;
        k
    }

    pub fn insert_design_point(&mut self, index: usize, xi: Vec<f64>) {
        assert_eq!(xi.len(), self.dim);
        self.design_points.insert(index, xi);
    }

    pub fn push_layer(&mut self, layer: LayerStats) {
        if let Some(last) = self.layers.last() {
            assert!(layer.iter_index() > last.iter_index());
            assert_eq!(layer.prev_index(), Some(last.iter_index()));
        } else {
            assert!(layer.prev_index().is_none());
        }
        self.layers.push(layer);
    }

    pub fn pop_layer(&mut self) -> Option<LayerStats> {
        let layer = self.layers.pop();
        if let Some(l) = &layer {
            self.design_points.remove(&l.iter_index());
        }
        layer
    }

    /// Drop every layer and retained design point; callers rebuild the base.
    pub fn clear(&mut self) {
        self.layers.clear();
        self.design_points.clear();
    }

    /// Convert the layer at `pos` into an empty raw base and discard every
    /// earlier layer. The accumulated difference samples at `pos` cannot
    /// seed a raw base, so the new base starts from scratch.
    pub fn rebase_at(&mut self, pos: usize, n_part: usize) {
        let level = self.layers[pos].iter_index();
        let new_base = LayerStats::raw_base(level, self.dim, n_part, self.population);
        self.layers.drain(..pos);
        self.layers[0] = new_base;
        self.prune_design_points(None);
    }

    /// Collapse layers `0..=pos` into a single frozen base carrying
    /// `vector`; used once the prefix is exact for a finite population.
    pub fn collapse_prefix_to_frozen(&mut self, pos: usize, vector: Vec<f64>) {
        let level = self.layers[pos].iter_index();
        self.layers.drain(..=pos);
        self.layers.insert(0, LayerStats::frozen_base(level, vector));
        self.prune_design_points(None);
    }

    /// Keep only design points still referenced by a layer (or by `extra`).
    pub fn prune_design_points(&mut self, extra: Option<usize>) {
        let mut keep: Vec<usize> = self
            .layers
            .iter()
            .flat_map(|l| [Some(l.iter_index()), l.prev_index()])
            .flatten()
            .collect();
        if let Some(e) = extra {
            keep.push(e);
        }
        self.design_points.retain(|k, _| keep.contains(k));
    }

    /// The telescoped mean-gradient estimate: sum of layer means plus any
    /// frozen vector.
    pub fn estimate(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for layer in &self.layers {
            vecops::axpy(1.0, layer.mean(), &mut out);
        }
        out
    }

    /// Squared statistical error of the estimate. Infinite populations sum
    /// `V / M` over layers; finite populations apply the without-replacement
    /// correction `(N - M) / (N - 1)`. Frozen bases and undersampled layers
    /// (fewer than two samples) contribute zero.
    pub fn stat_error_sq(&self) -> f64 {
        let mut total = 0.0;
        for layer in &self.layers {
            if layer.kind() == LayerKind::FrozenBase || layer.samples() == 0 {
                continue;
            }
            let m = layer.samples() as f64;
            let v = layer.variance();
            let term = v / m;
            total += match self.population {
                Population::Infinite => term,
                Population::Finite(n) => {
                    if n <= 1 {
                        0.0
                    } else {
                        term * (n as f64 - m) / (n as f64 - 1.0)
                    }
                }
            };
        }
        total
    }

    /// True when some non-frozen layer has fewer than two samples, i.e. its
    /// variance estimate is not yet meaningful.
    pub fn has_undersampled_layers(&self) -> bool {
        self.layers
            .iter()
            .any(|l| l.kind() != LayerKind::FrozenBase && l.samples() < 2)
    }

    pub fn telemetry(&self) -> Vec<LayerTelemetry> {
        self.layers
            .iter()
            .map(|l| LayerTelemetry {
                index: l.iter_index(),
                samples: l.samples(),
                variance: l.variance(),
                cost_weight: l.cost_weight(),
            })
            .collect()
    }
}
