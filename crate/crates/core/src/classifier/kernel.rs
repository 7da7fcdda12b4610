//! Gaussian kernel, bandwidth rule and kernel row access.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Which average sets the kernel bandwidth `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// Mean Euclidean norm of the training vectors.
    #[default]
    MeanNorm,
    /// Mean squared Euclidean norm.
    MeanSquaredNorm,
}

pub fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-||u - v||^2 / (2 sigma^2))`.
pub fn gaussian_kernel(u: &[f64], v: &[f64], sigma2: f64) -> f64 {
    (-squared_distance(u, v) / (2.0 * sigma2)).exp()
}

/// Bandwidth `sigma^2` from the training rows.
pub fn estimate_bandwidth(features: &FeatureMatrix, rule: BandwidthRule) -> Result<f64> {
    if features.n_rows() == 0 {
        return Err(Error::EmptyInput("bandwidth needs at least one vector"));
    }
    let total: f64 = features
        .rows()
        .map(|r| {
            let sq: f64 = r.iter().map(|v| v * v).sum();
            match rule {
                BandwidthRule::MeanNorm => sq.sqrt(),
                BandwidthRule::MeanSquaredNorm => sq,
            }
        })
        .sum();
    let sigma2 = total / features.n_rows() as f64;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::DegenerateBandwidth(sigma2));
    }
    Ok(sigma2)
}

/// Default size limit for keeping the full kernel matrix in memory.
pub const FULL_MATRIX_LIMIT: usize = 20_000;

/// Gram matrix rows of a training set, either precomputed or computed on
/// demand with a bounded least-recently-used cache.
pub struct KernelRows<'a> {
    data: &'a FeatureMatrix,
    sigma2: f64,
    storage: Storage,
}

enum Storage {
    Full(Vec<Arc<Vec<f64>>>),
    Cached(Mutex<RowCache>),
}

struct RowCache {
    capacity: usize,
    clock: u64,
    rows: HashMap<usize, (Arc<Vec<f64>>, u64)>,
    order: BTreeMap<u64, usize>,
}

impl RowCache {
    fn get(&mut self, i: usize) -> Option<Arc<Vec<f64>>> {
        let clock = self.clock + 1;
        let entry = self.rows.get_mut(&i)?;
        self.order.remove(&entry.1);
        entry.1 = clock;
        self.order.insert(clock, i);
        self.clock = clock;
        Some(entry.0.clone())
    }

    fn insert(&mut self, i: usize, row: Arc<Vec<f64>>) {
        if self.rows.len() >= self.capacity {
            if let Some((_, old)) = self.order.pop_first() {
                self.rows.remove(&old);
            }
        }
        self.clock += 1;
        self.order.insert(self.clock, i);
        self.rows.insert(i, (row, self.clock));
    }
}

impl<'a> KernelRows<'a> {
    /// Precomputes the matrix when `n <= full_limit`, otherwise caches up to
    /// `cached_rows` rows.
    pub fn new(data: &'a FeatureMatrix, sigma2: f64, full_limit: usize, cached_rows: usize) -> Self {
        let n = data.n_rows();
        let storage = if n <= full_limit {
            let rows = (0..n).into_par_iter().map(|i| Arc::new(Self::compute(data, sigma2, i))).collect();
            Storage::Full(rows)
        } else {
            Storage::Cached(Mutex::new(RowCache {
                capacity: cached_rows.max(2),
                clock: 0,
                rows: HashMap::new(),
                order: BTreeMap::new(),
            }))
        };
        Self { data, sigma2, storage }
    }

    fn compute(data: &FeatureMatrix, sigma2: f64, i: usize) -> Vec<f64> {
        let u = data.row(i);
        data.rows().map(|v| gaussian_kernel(u, v, sigma2)).collect()
    }

    pub fn len(&self) -> usize {
        self.data.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.n_rows() == 0
    }

    pub fn is_full(&self) -> bool {
        matches!(self.storage, Storage::Full(_))
    }

    /// Row `i` of the Gram matrix.
    pub fn row(&self, i: usize) -> Arc<Vec<f64>> {
        match &self.storage {
            Storage::Full(rows) => rows[i].clone(),
            Storage::Cached(cache) => {
                if let Some(r) = cache.lock().expect("kernel cache poisoned").get(i) {
                    return r;
                }
                let row = Arc::new(Self::compute(self.data, self.sigma2, i));
                cache.lock().expect("kernel cache poisoned").insert(i, row.clone());
                row
            }
        }
    }
}
