//! Second-order scattering: `S_J x = A_J |W_2| |W_1| x`.
//!
//! `W_1` is the spatial Morlet wavelet modulus transform, `W_2` either the
//! translation wavelet modulus transform applied to each first-order map or
//! the separable roto-translation transform that also filters along the
//! orientation axis, and `A_J` the final Gaussian averaging at scale `2^J`.

mod layers;
mod network;
mod output;
mod paths;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::MorletParams;

pub use layers::{Layer1, Layer2, Layer2Block, Map};
pub use network::ScatteringNetwork;
pub use output::ScatteringOutput;
pub use paths::{
    completeness_check, completeness_value, count_frames, enumerate_frames, enumerate_paths, AngularBand, Path,
};

/// How convolutions treat the image border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Circular convolutions on the image grid.
    #[default]
    Periodic,
    /// Reflect the image to twice its side, run periodically, keep the
    /// quadrant of the original image.
    Mirror,
}

/// Geometry and options of a scattering network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScatteringConfig {
    /// `log2` of the image side.
    pub log_side: u32,
    /// Number of dyadic spatial scales `J`.
    pub max_scale: u32,
    /// Number of orientations `L`.
    pub n_angles: usize,
    /// Number of angular scales `K`.
    pub angular_scales: u32,
    /// Highest scattering order, 1 or 2.
    pub order: u8,
    /// Filter the orientation axis at order 2.
    pub roto: bool,
    pub boundary: Boundary,
    pub morlet: MorletParams,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self::for_side(5)
    }
}

/// `K` with `2^K = L / 2`.
pub fn default_angular_scales(n_angles: usize) -> u32 {
    (n_angles / 2).max(2).trailing_zeros()
}

impl ScatteringConfig {
    /// Defaults for a `2^d x 2^d` image: `J = d - 2`, `L = 8`, `2^K = L / 2`,
    /// second order with roto-translation.
    pub fn for_side(log_side: u32) -> Self {
        Self {
            log_side,
            max_scale: log_side.saturating_sub(2).max(1),
            n_angles: 8,
            angular_scales: default_angular_scales(8),
            order: 2,
            roto: true,
            boundary: Boundary::Periodic,
            morlet: MorletParams::default(),
        }
    }

    pub fn side(&self) -> usize {
        1 << self.log_side
    }

    /// Side of the output grid, `2^{d - J}`.
    pub fn grid_side(&self) -> usize {
        1 << (self.log_side - self.max_scale)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_scale == 0 || self.max_scale > self.log_side {
            return Err(Error::InvalidDims(format!(
                "need 1 <= J <= d, got J={}, d={}",
                self.max_scale, self.log_side
            )));
        }
        if !(1..=2).contains(&self.order) {
            return Err(Error::InvalidArgument(format!("scattering order must be 1 or 2, got {}", self.order)));
        }
        Ok(())
    }

    /// Column count of the flattened output for `n_channels` channels.
    pub fn output_dim(&self, n_channels: usize) -> usize {
        enumerate_paths(self, n_channels).len() * self.grid_side() * self.grid_side()
    }
}
