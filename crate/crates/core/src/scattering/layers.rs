//! Intermediate maps of the scattering cascade.

use super::AngularBand;

/// A square real map sampled every `2^stride_log` pixels of the input grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Map {
    pub side: usize,
    pub stride_log: u32,
    pub data: Vec<f64>,
}

impl Map {
    pub fn new(side: usize, stride_log: u32, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), side * side);
        Self { side, stride_log, data }
    }

    pub fn constant(side: usize, stride_log: u32, value: f64) -> Self {
        Self::new(side, stride_log, vec![value; side * side])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.side + col]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// First-order maps of every channel.
///
/// `lowpass[c][j - 1]` holds `x * phi_j` and `band[c][j - 1][l]` holds
/// `|x * psi_{j, l pi / L}|`, both sampled at stride `2^{j - 1}`.
#[derive(Debug, Clone)]
pub struct Layer1 {
    pub n_angles: usize,
    pub max_scale: u32,
    pub lowpass: Vec<Vec<Map>>,
    pub band: Vec<Vec<Vec<Map>>>,
}

impl Layer1 {
    pub fn n_channels(&self) -> usize {
        self.band.len()
    }

    pub fn band_map(&self, channel: usize, j: u32, l: usize) -> &Map {
        &self.band[channel][j as usize - 1][l]
    }

    pub fn lowpass_map(&self, channel: usize, j: u32) -> &Map {
        &self.lowpass[channel][j as usize - 1]
    }
}

/// Second-order maps for one `(channel, j1, j2, beta, band)` combination.
///
/// `frames[t]` is the map at orientation index `t * angular_stride`, sampled
/// spatially at stride `2^{j2 - 1}`.
#[derive(Debug, Clone)]
pub struct Layer2Block {
    pub channel: usize,
    pub j1: u32,
    pub j2: u32,
    pub beta: usize,
    pub band: AngularBand,
    pub angular_stride: usize,
    pub frames: Vec<Map>,
}

#[derive(Debug, Clone, Default)]
pub struct Layer2 {
    pub blocks: Vec<Layer2Block>,
}

impl Layer2 {
    pub fn frame_count(&self) -> usize {
        self.blocks.iter().map(|b| b.frames.len()).sum()
    }

    pub fn maps(&self) -> impl Iterator<Item = &Map> {
        self.blocks.iter().flat_map(|b| b.frames.iter())
    }

    pub fn block(&self, channel: usize, j1: u32, j2: u32, beta: usize, band: AngularBand) -> Option<&Layer2Block> {
        self.blocks
            .iter()
            .find(|b| b.channel == channel && b.j1 == j1 && b.j2 == j2 && b.beta == beta && b.band == band)
    }
}
