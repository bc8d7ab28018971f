//! Online mean/variance aggregate for vector samples.
//!
//! The mean is tracked per component while the second central moment is
//! accumulated as a single scalar summed over components, which is exactly
//! the quantity the statistical-error model consumes. Merging follows the
//! parallel combination rule, so partitioned and distributed accumulation
//! agree with a single stream.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("dimension mismatch: aggregate has {expected}, sample has {actual}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub actual: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelfordAgg {
    count: u64,
    mean: Vec<f64>,
    m2_total: f64,
}

impl WelfordAgg {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2_total: 0.0,
        }
    }

    /// Rebuild an aggregate from raw state (e.g. checkpoints or fixtures).
    pub fn from_raw(count: u64, mean: Vec<f64>, m2_total: f64) -> Self {
        assert!(m2_total >= 0.0);
        assert!(count > 0 || (m2_total == 0.0 && mean.iter().all(|&m| m == 0.0)));
        Self {
            count,
            mean,
            m2_total,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn m2_total(&self) -> f64 {
        self.m2_total
    }

    /// Unbiased sample variance summed over components; zero below two
    /// samples.
    pub fn sample_variance_total(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2_total / (self.count - 1) as f64
        }
    }

    pub fn try_update(&mut self, sample: &[f64]) -> Result<(), DimensionMismatch> {
        if sample.len() != self.mean.len() {
            return Err(DimensionMismatch {
                expected: self.mean.len(),
                actual: sample.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for (m, &x) in self.mean.iter_mut().zip(sample) {
            let delta = x - *m;
            *m += delta / n;
            self.m2_total += delta * (x - *m);
        }
        Ok(())
    }

    /// Streaming update with the standard per-component recurrence.
    pub fn update(&mut self, sample: &[f64]) {
        self.try_update(sample).expect("sample dimension");
    }

    pub fn try_merge(&self, other: &WelfordAgg) -> Result<WelfordAgg, DimensionMismatch> {
        if other.mean.len() != self.mean.len() {
            return Err(DimensionMismatch {
                expected: self.mean.len(),
                actual: other.mean.len(),
            });
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let mut mean = vec![0.0; self.mean.len()];
        let mut cross = 0.0;
        for ((m, &a), &b) in mean.iter_mut().zip(&self.mean).zip(&other.mean) {
            let delta = b - a;
            *m = a + delta * (nb / n);
            cross += delta * delta;
        }
        Ok(WelfordAgg {
            count: self.count + other.count,
            mean,
            m2_total: self.m2_total + other.m2_total + cross * (na * nb / n),
        })
    }

    /// Combine two aggregates as if their sample streams were concatenated.
    pub fn merge(&self, other: &WelfordAgg) -> WelfordAgg {
        self.try_merge(other).expect("aggregate dimensions")
    }
}
