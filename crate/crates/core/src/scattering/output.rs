//! Averaged scattering coefficients with their path table.

use super::paths::{AngularBand, Path};
use super::ScatteringConfig;

/// Scattering coefficients of one image.
///
/// Each path owns a `g x g` grid of averaged samples (`g = 2^{d - J}`), stored
/// row-major; paths are kept in their canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringOutput {
    config: ScatteringConfig,
    n_channels: usize,
    paths: Vec<Path>,
    values: Vec<f64>,
}

impl ScatteringOutput {
    pub(crate) fn new(config: ScatteringConfig, n_channels: usize, paths: Vec<Path>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), paths.len() * config.grid_side() * config.grid_side());
        Self { config, n_channels, paths, values }
    }

    pub fn config(&self) -> &ScatteringConfig {
        &self.config
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn grid_side(&self) -> usize {
        self.config.grid_side()
    }

    fn grid_len(&self) -> usize {
        self.grid_side() * self.grid_side()
    }

    /// Flat coefficient vector, path-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Averaged grid of the `i`-th path.
    pub fn grid(&self, i: usize) -> &[f64] {
        let g = self.grid_len();
        &self.values[i * g..(i + 1) * g]
    }

    pub fn lookup(&self, path: &Path) -> Option<&[f64]> {
        self.paths.binary_search(path).ok().map(|i| self.grid(i))
    }

    /// `(path, grid)` pairs of one order.
    pub fn order(&self, order: u8) -> impl Iterator<Item = (&Path, &[f64])> {
        self.paths.iter().enumerate().filter(move |(_, p)| p.order == order).map(|(i, p)| (p, self.grid(i)))
    }

    /// Number of scalar coefficients of one order.
    pub fn count(&self, order: u8) -> usize {
        self.paths.iter().filter(|p| p.order == order).count() * self.grid_len()
    }

    /// Per-coefficient weights of the energy norm: the spatial area `4^J` of
    /// each grid sample times the angular stride of second-order bands.
    pub fn column_weights(&self) -> Vec<f64> {
        let area = 4f64.powi(self.config.max_scale as i32);
        self.paths
            .iter()
            .flat_map(|p| {
                let angular = match p.band {
                    AngularBand::None => 1,
                    band => band.stride(self.config.angular_scales),
                };
                std::iter::repeat_n(area * angular as f64, self.grid_len())
            })
            .collect()
    }

    pub fn weighted_norm(&self) -> f64 {
        self.values.iter().zip(self.column_weights()).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
    }

    /// Weighted distance to another output of the same network.
    pub fn weighted_distance(&self, other: &ScatteringOutput) -> f64 {
        assert_eq!(self.paths, other.paths, "outputs of different networks");
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.column_weights())
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}
