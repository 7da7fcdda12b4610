//! Dyadic square multi-channel images, the input of the scattering network.

use crate::error::{Error, Result};

/// A `2^d x 2^d` image with one or more real planes stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    log_side: u32,
    planes: Vec<Vec<f64>>,
}

impl Image {
    pub fn new(side: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        if side == 0 || !side.is_power_of_two() {
            return Err(Error::InvalidDims(format!("image side {side} is not a power of two")));
        }
        if planes.is_empty() {
            return Err(Error::InvalidDims("image has no channels".into()));
        }
        for (c, plane) in planes.iter().enumerate() {
            if plane.len() != side * side {
                return Err(Error::InvalidDims(format!(
                    "channel {c} has {} samples, expected {}",
                    plane.len(),
                    side * side
                )));
            }
            if plane.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDims(format!("channel {c} has non-finite samples")));
            }
        }
        Ok(Self { log_side: side.trailing_zeros(), planes })
    }

    pub fn gray(side: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(side, vec![data])
    }

    pub fn zeros(side: usize, channels: usize) -> Result<Self> {
        Self::new(side, vec![vec![0.0; side * side]; channels.max(1)])
    }

    pub fn side(&self) -> usize {
        1 << self.log_side
    }

    pub fn log_side(&self) -> u32 {
        self.log_side
    }

    pub fn n_channels(&self) -> usize {
        self.planes.len()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.planes[c]
    }

    pub fn planes(&self) -> &[Vec<f64>] {
        &self.planes
    }

    pub fn into_planes(self) -> Vec<Vec<f64>> {
        self.planes
    }

    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.planes[c][row * self.side() + col]
    }

    /// Euclidean norm over all channels and pixels.
    pub fn norm(&self) -> f64 {
        self.planes.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            log_side: self.log_side,
            planes: self.planes.iter().map(|p| p.iter().map(|&v| f(v)).collect()).collect(),
        }
    }

    /// Cyclic translation: `out(row, col) = in(row - dy, col - dx)`.
    pub fn translated(&self, dy: usize, dx: usize) -> Self {
        let n = self.side();
        let planes = self
            .planes
            .iter()
            .map(|p| {
                let mut out = vec![0.0; n * n];
                for r in 0..n {
                    for c in 0..n {
                        out[((r + dy) % n) * n + (c + dx) % n] = p[r * n + c];
                    }
                }
                out
            })
            .collect();
        Self { log_side: self.log_side, planes }
    }

    /// Counter-clockwise quarter turn about the origin of the periodic grid.
    pub fn rotated90(&self) -> Self {
        let n = self.side();
        let planes = self.planes.iter().map(|p| crate::fourier::rot90_ccw(p, n)).collect();
        Self { log_side: self.log_side, planes }
    }

    /// Symmetric (reflecting) extension to a `2n x 2n` periodic image.
    pub fn mirror_extended(&self) -> Self {
        let n = self.side();
        let m = 2 * n;
        let reflect = |i: usize| if i < n { i } else { m - 1 - i };
        let planes = self
            .planes
            .iter()
            .map(|p| {
                let mut out = vec![0.0; m * m];
                for r in 0..m {
                    for c in 0..m {
                        out[r * m + c] = p[reflect(r) * n + reflect(c)];
                    }
                }
                out
            })
            .collect();
        Self { log_side: self.log_side + 1, planes }
    }
}
