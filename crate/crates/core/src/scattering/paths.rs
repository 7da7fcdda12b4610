//! Path metadata, enumeration and frame counting.

use serde::{Deserialize, Serialize};

use super::ScatteringConfig;

/// Angular channel of a second-order coefficient.
///
/// Translation-only networks keep the orientation axis unfiltered (`None`).
/// Roto-translation networks split it into angular wavelet bands and one
/// angular low-pass. The derived order sorts `None` and `Lowpass` before all
/// wavelet bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AngularBand {
    None,
    Lowpass,
    Wavelet(u32),
}

impl AngularBand {
    /// Scale index stored in path tables: 0 for `None`/`Lowpass`, `k` for a
    /// wavelet band.
    pub fn k(self) -> u32 {
        match self {
            AngularBand::Wavelet(k) => k,
            _ => 0,
        }
    }

    pub fn kind(self) -> u8 {
        match self {
            AngularBand::None => 0,
            AngularBand::Lowpass => 1,
            AngularBand::Wavelet(_) => 2,
        }
    }

    pub fn from_kind(kind: u8, k: u32) -> Option<Self> {
        match kind {
            0 => Some(AngularBand::None),
            1 => Some(AngularBand::Lowpass),
            2 if k >= 1 => Some(AngularBand::Wavelet(k)),
            _ => None,
        }
    }

    /// Angular subsampling stride for a bank with `max_k` angular scales.
    pub fn stride(self, max_k: u32) -> usize {
        match self {
            AngularBand::None => 1,
            AngularBand::Lowpass => 1 << (max_k - 1),
            AngularBand::Wavelet(k) => 1 << (k - 1),
        }
    }
}

/// Identifies one averaged coefficient map.
///
/// Fields are declared in sort order, so the derived `Ord` gives the stable
/// column ordering `(order, channel, j1, theta, j2, beta, band)`. For order 0
/// every index is 0; for order 1 `j2`, `beta` are 0 and `band` is `None`.
/// For order 2, `theta` is the original angle index of the retained sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Path {
    pub order: u8,
    pub channel: u32,
    pub j1: u32,
    pub theta: u32,
    pub j2: u32,
    pub beta: u32,
    pub band: AngularBand,
}

impl Path {
    pub fn order0(channel: u32) -> Self {
        Self { order: 0, channel, j1: 0, theta: 0, j2: 0, beta: 0, band: AngularBand::None }
    }

    pub fn order1(channel: u32, j: u32, theta: u32) -> Self {
        Self { order: 1, channel, j1: j, theta, j2: 0, beta: 0, band: AngularBand::None }
    }

    pub fn order2(channel: u32, j1: u32, theta: u32, j2: u32, beta: u32, band: AngularBand) -> Self {
        Self { order: 2, channel, j1, theta, j2, beta, band }
    }
}

/// Closed-form frame count `Q_j = 1 + L j + L^2 j (j - 1)`.
pub fn count_frames(j: u32, n_angles: usize) -> u64 {
    let (j, l) = (u64::from(j), n_angles as u64);
    1 + l * j + l * l * j * j.saturating_sub(1)
}

/// Value of `2^{-2J} L^2 J^2`.
pub fn completeness_value(max_scale: u32, n_angles: usize) -> f64 {
    let j = f64::from(max_scale);
    let l = n_angles as f64;
    (l * l * j * j) / 4f64.powi(max_scale as i32)
}

/// Whether `2^{-2J} L^2 J^2 >= 1`.
pub fn completeness_check(max_scale: u32, n_angles: usize) -> bool {
    completeness_value(max_scale, n_angles) >= 1.0
}

/// Angular bands produced for each `(j1, j2, beta)` triple, in path order.
pub(crate) fn angular_bands(config: &ScatteringConfig) -> Vec<AngularBand> {
    if config.roto {
        let mut bands = vec![AngularBand::Lowpass];
        bands.extend((1..=config.angular_scales).map(AngularBand::Wavelet));
        bands
    } else {
        vec![AngularBand::None]
    }
}

/// All paths of a network in column order.
pub fn enumerate_paths(config: &ScatteringConfig, n_channels: usize) -> Vec<Path> {
    let l = config.n_angles as u32;
    let max_j = config.max_scale;
    let bands = angular_bands(config);
    let mut paths = Vec::new();
    for c in 0..n_channels as u32 {
        paths.push(Path::order0(c));
    }
    for c in 0..n_channels as u32 {
        for j in 1..=max_j {
            for theta in 0..l {
                paths.push(Path::order1(c, j, theta));
            }
        }
    }
    if config.order >= 2 {
        for c in 0..n_channels as u32 {
            for j1 in 1..=max_j {
                for theta in 0..l {
                    for j2 in j1 + 1..=max_j {
                        for beta in 0..l {
                            for &band in &bands {
                                if theta as usize % band.stride(config.angular_scales) == 0 {
                                    paths.push(Path::order2(c, j1, theta, j2, beta, band));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert!(paths.windows(2).all(|w| w[0] < w[1]));
    paths
}

/// Number of frames enumerated by a gray-image network of depth `j`.
pub fn enumerate_frames(j: u32, n_angles: usize, angular_scales: u32) -> usize {
    let config = ScatteringConfig {
        max_scale: j,
        n_angles,
        angular_scales,
        log_side: j.max(1),
        ..ScatteringConfig::default()
    };
    enumerate_paths(&config, 1).len()
}
