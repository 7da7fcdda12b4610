//! FFT implementation of the scattering cascade.

use num_complex::Complex64;

use super::layers::{Layer1, Layer2, Layer2Block, Map};
use super::output::ScatteringOutput;
use super::paths::{angular_bands, AngularBand, Path};
use super::{Boundary, ScatteringConfig};
use crate::error::{Error, Result};
use crate::filterbank::{build_angular_bank_with, build_spatial_bank, AngularFilterBank, SpatialFilterBank};
use crate::fourier::{downsample_spectrum, periodize, FftPlans};
use crate::image::Image;

/// A configured network with its filter banks and FFT plans.
///
/// Filters are multiplied in the Fourier domain at the resolution of the map
/// they act on: a filter at stride `2^r` is the periodization of the full
/// resolution spectrum, i.e. the spatial filter `4^r h[2^r m]`. All
/// convolutions are circular.
#[derive(Clone)]
pub struct ScatteringNetwork {
    config: ScatteringConfig,
    internal_log: u32,
    spatial: SpatialFilterBank,
    angular: Option<AngularFilterBank>,
    plans: FftPlans,
    /// `psi_coarse[r][(j - 1) * L + l]` for `j > r + 1`, empty otherwise.
    psi_coarse: Vec<Vec<Vec<f64>>>,
    /// `phi_J` periodized to stride `2^r`, `0 <= r <= J`.
    phi_coarse: Vec<Vec<f64>>,
}

impl std::fmt::Debug for ScatteringNetwork {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScatteringNetwork").field("config", &self.config).finish_non_exhaustive()
    }
}

impl ScatteringNetwork {
    pub fn new(config: ScatteringConfig) -> Result<Self> {
        config.validate()?;
        let internal_log = match config.boundary {
            Boundary::Periodic => config.log_side,
            Boundary::Mirror => config.log_side + 1,
        };
        let spatial = build_spatial_bank(internal_log, config.max_scale, config.n_angles, config.morlet)?;
        let angular = if config.roto && config.order >= 2 {
            Some(build_angular_bank_with(config.n_angles, config.angular_scales, config.morlet)?)
        } else {
            None
        };
        Self::with_banks(config, spatial, angular)
    }

    /// Builds a network around existing banks, which must match `config`.
    pub fn with_banks(config: ScatteringConfig, spatial: SpatialFilterBank, angular: Option<AngularFilterBank>) -> Result<Self> {
        config.validate()?;
        let internal_log = match config.boundary {
            Boundary::Periodic => config.log_side,
            Boundary::Mirror => config.log_side + 1,
        };
        if spatial.log_side() != internal_log
            || spatial.max_scale() != config.max_scale
            || spatial.n_angles() != config.n_angles
        {
            return Err(Error::BankMismatch(format!(
                "spatial bank (d={}, J={}, L={}) does not fit the network (d={internal_log}, J={}, L={})",
                spatial.log_side(),
                spatial.max_scale(),
                spatial.n_angles(),
                config.max_scale,
                config.n_angles
            )));
        }
        let needs_angular = config.roto && config.order >= 2;
        match &angular {
            Some(a) if a.n_angles() != config.n_angles || a.max_scale() != config.angular_scales => {
                return Err(Error::BankMismatch(format!(
                    "angular bank (L={}, K={}) does not fit the network (L={}, K={})",
                    a.n_angles(),
                    a.max_scale(),
                    config.n_angles,
                    config.angular_scales
                )));
            }
            None if needs_angular => return Err(Error::BankMismatch("roto-translation needs an angular bank".into())),
            _ => {}
        }

        let n = 1usize << internal_log;
        let big_j = config.max_scale;
        let l = config.n_angles;
        let psi_coarse = (0..big_j)
            .map(|r| {
                (1..=big_j)
                    .flat_map(|j| (0..l).map(move |t| (j, t)))
                    .map(|(j, t)| if r > 0 && j > r + 1 { periodize(spatial.psi(j, t), n, 1 << r) } else { Vec::new() })
                    .collect()
            })
            .collect();
        let phi_coarse = (0..=big_j).map(|r| periodize(spatial.phi(big_j), n, 1 << r)).collect();
        Ok(Self { config, internal_log, spatial, angular, plans: FftPlans::new(internal_log), psi_coarse, phi_coarse })
    }

    pub fn config(&self) -> &ScatteringConfig {
        &self.config
    }

    pub fn spatial_bank(&self) -> &SpatialFilterBank {
        &self.spatial
    }

    pub fn angular_bank(&self) -> Option<&AngularFilterBank> {
        self.angular.as_ref()
    }

    fn internal_side(&self) -> usize {
        1 << self.internal_log
    }

    /// Band-pass `psi_{j,l}` at stride `2^r`.
    fn psi_at(&self, r: u32, j: u32, l: usize) -> &[f64] {
        if r == 0 {
            self.spatial.psi(j, l)
        } else {
            &self.psi_coarse[r as usize][(j as usize - 1) * self.config.n_angles + l]
        }
    }

    /// `IFFT(downsample(spec * filter, factor))`.
    fn filter_decimate(&self, spec: &[Complex64], side: usize, filter: &[f64], factor: usize) -> Vec<Complex64> {
        let product: Vec<Complex64> = spec.iter().zip(filter).map(|(s, f)| s * f).collect();
        let mut small = downsample_spectrum(&product, side, factor);
        self.plans.get(side / factor).inverse(&mut small);
        small
    }

    fn check_plane_count(&self, x: &Image) -> Result<()> {
        if x.side() != self.internal_side() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} image", self.internal_side()),
                found: format!("{0}x{0}", x.side()),
            });
        }
        Ok(())
    }

    fn w1_plane(&self, plane: &[f64]) -> (Vec<Map>, Vec<Vec<Map>>) {
        let n = self.internal_side();
        let spec = self.plans.forward_real(plane, n);
        let mut lowpass = Vec::new();
        let mut band = Vec::new();
        for j in 1..=self.config.max_scale {
            let r = j - 1;
            let factor = 1 << r;
            let low = self.filter_decimate(&spec, n, self.spatial.phi(j), factor);
            lowpass.push(Map::new(n / factor, r, low.iter().map(|v| v.re).collect()));
            let maps = (0..self.config.n_angles)
                .map(|l| {
                    let y = self.filter_decimate(&spec, n, self.spatial.psi(j, l), factor);
                    Map::new(n / factor, r, y.iter().map(|v| v.norm()).collect())
                })
                .collect();
            band.push(maps);
        }
        (lowpass, band)
    }

    /// First-order wavelet modulus transform of every channel of `x`, which
    /// must already live on the network's internal grid.
    pub fn wavelet_modulus_w1(&self, x: &Image) -> Result<Layer1> {
        self.check_plane_count(x)?;
        let (lowpass, band) = x.planes().iter().map(|p| self.w1_plane(p)).unzip();
        Ok(Layer1 { n_angles: self.config.n_angles, max_scale: self.config.max_scale, lowpass, band })
    }

    /// Second-order maps for one channel and one scale pair, given the
    /// spectra of the first-order maps `|x * psi_{j1, theta}|`.
    fn pair_blocks(&self, spectra: &[Vec<Complex64>], channel: usize, j1: u32, j2: u32) -> Vec<Layer2Block> {
        let l = self.config.n_angles;
        let r = j1 - 1;
        let side = self.internal_side() >> r;
        let factor = 1 << (j2 - j1);
        let out_side = side / factor;
        let bands = angular_bands(&self.config);
        let mut blocks = Vec::with_capacity(l * bands.len());
        for beta in 0..l {
            let filter = self.psi_at(r, j2, beta);
            let y: Vec<Vec<Complex64>> = spectra.iter().map(|s| self.filter_decimate(s, side, filter, factor)).collect();
            for &band in &bands {
                let frames = match band {
                    AngularBand::None => {
                        y.iter().map(|v| Map::new(out_side, j2 - 1, v.iter().map(|z| z.norm()).collect())).collect()
                    }
                    AngularBand::Lowpass | AngularBand::Wavelet(_) => {
                        let angular = self.angular.as_ref().expect("angular bank checked at construction");
                        let taps = match band {
                            AngularBand::Wavelet(k) => angular.psi_taps(k),
                            _ => angular.phi_taps(),
                        };
                        let stride = band.stride(self.config.angular_scales);
                        (0..l / stride)
                            .map(|t| {
                                let mut z = vec![Complex64::new(0.0, 0.0); out_side * out_side];
                                for (theta, yt) in y.iter().enumerate() {
                                    let w = taps[(t * stride + l - theta) % l];
                                    for (acc, v) in z.iter_mut().zip(yt) {
                                        *acc += v * w;
                                    }
                                }
                                Map::new(out_side, j2 - 1, z.iter().map(|v| v.norm()).collect())
                            })
                            .collect()
                    }
                };
                blocks.push(Layer2Block {
                    channel,
                    j1,
                    j2,
                    beta,
                    band,
                    angular_stride: band.stride(self.config.angular_scales),
                    frames,
                });
            }
        }
        blocks
    }

    fn band_spectra(&self, layer1: &Layer1, channel: usize, j1: u32) -> Vec<Vec<Complex64>> {
        let side = self.internal_side() >> (j1 - 1);
        (0..self.config.n_angles).map(|t| self.plans.forward_real(&layer1.band_map(channel, j1, t).data, side)).collect()
    }

    /// Second-order transform of a first-order layer: spatial filtering by
    /// `psi_{j2, beta}` for every `j2 > j1`, then (roto-translation only)
    /// circular filtering along the orientation axis, then modulus.
    pub fn roto_translation_w2(&self, layer1: &Layer1) -> Result<Layer2> {
        if layer1.n_angles != self.config.n_angles || layer1.max_scale != self.config.max_scale {
            return Err(Error::BankMismatch(format!(
                "layer has L={}, J={}; network has L={}, J={}",
                layer1.n_angles, layer1.max_scale, self.config.n_angles, self.config.max_scale
            )));
        }
        for c in 0..layer1.n_channels() {
            for j in 1..=self.config.max_scale {
                let expected = self.internal_side() >> (j - 1);
                for l in 0..self.config.n_angles {
                    if layer1.band_map(c, j, l).side != expected {
                        return Err(Error::DimensionMismatch {
                            expected: format!("side {expected} at scale {j}"),
                            found: format!("side {}", layer1.band_map(c, j, l).side),
                        });
                    }
                }
            }
        }
        let mut layer2 = Layer2::default();
        for c in 0..layer1.n_channels() {
            for j1 in 1..self.config.max_scale {
                let spectra = self.band_spectra(layer1, c, j1);
                for j2 in j1 + 1..=self.config.max_scale {
                    layer2.blocks.extend(self.pair_blocks(&spectra, c, j1, j2));
                }
            }
        }
        Ok(layer2)
    }

    /// Convolution with `phi_J` followed by sampling at stride `2^J`.
    pub fn average_aj(&self, map: &Map) -> Result<Map> {
        let r = map.stride_log;
        let big_j = self.config.max_scale;
        if r > big_j || map.side != self.internal_side() >> r || map.data.len() != map.side * map.side {
            return Err(Error::DimensionMismatch {
                expected: format!("square map of side {} at stride 2^{r} (r <= {big_j})", self.internal_side() >> r.min(31)),
                found: format!("side {} with {} samples", map.side, map.data.len()),
            });
        }
        let spec = self.plans.forward_real(&map.data, map.side);
        let out = self.filter_decimate(&spec, map.side, &self.phi_coarse[r as usize], 1 << (big_j - r));
        Ok(Map::new(map.side >> (big_j - r), big_j, out.iter().map(|v| v.re).collect()))
    }

    fn crop(&self, grid: Map) -> Vec<f64> {
        let g = self.config.grid_side();
        if grid.side == g {
            return grid.data;
        }
        (0..g).flat_map(|row| grid.data[row * grid.side..row * grid.side + g].to_vec()).collect()
    }

    fn averaged(&self, map: &Map) -> Vec<f64> {
        self.crop(self.average_aj(map).expect("internal maps have consistent geometry"))
    }

    /// Full scattering transform of an image of side `2^d`.
    pub fn scatter(&self, image: &Image) -> Result<ScatteringOutput> {
        if image.side() != self.config.side() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} image", self.config.side()),
                found: format!("{0}x{0}", image.side()),
            });
        }
        let extended;
        let x = match self.config.boundary {
            Boundary::Periodic => image,
            Boundary::Mirror => {
                extended = image.mirror_extended();
                &extended
            }
        };
        let mut entries: Vec<(Path, Vec<f64>)> = Vec::new();
        for (c, plane) in x.planes().iter().enumerate() {
            let cu = c as u32;
            entries.push((Path::order0(cu), self.averaged(&Map::new(self.internal_side(), 0, plane.clone()))));
            let (_, band) = self.w1_plane(plane);
            for (jm, maps) in band.iter().enumerate() {
                for (l, m) in maps.iter().enumerate() {
                    entries.push((Path::order1(cu, jm as u32 + 1, l as u32), self.averaged(m)));
                }
            }
            if self.config.order < 2 {
                continue;
            }
            for j1 in 1..self.config.max_scale {
                let side = self.internal_side() >> (j1 - 1);
                let spectra: Vec<Vec<Complex64>> =
                    band[j1 as usize - 1].iter().map(|m| self.plans.forward_real(&m.data, side)).collect();
                for j2 in j1 + 1..=self.config.max_scale {
                    for block in self.pair_blocks(&spectra, c, j1, j2) {
                        for (t, frame) in block.frames.iter().enumerate() {
                            let theta = (t * block.angular_stride) as u32;
                            let path = Path::order2(cu, j1, theta, j2, block.beta as u32, block.band);
                            entries.push((path, self.averaged(frame)));
                        }
                    }
                }
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let (paths, grids): (Vec<Path>, Vec<Vec<f64>>) = entries.into_iter().unzip();
        Ok(ScatteringOutput::new(self.config, x.n_channels(), paths, grids.concat()))
    }

    /// `||W_1 x||^2 / ||x||^2`, where `W_1 x` stacks `x * phi_J` and every
    /// `|x * psi_{j, theta}|`, each sample weighted by the area of its stride.
    pub fn w1_energy_ratio(&self, x: &Image) -> Result<f64> {
        let layer1 = self.wavelet_modulus_w1(x)?;
        let big_j = self.config.max_scale;
        let mut energy = 0.0;
        for c in 0..layer1.n_channels() {
            energy += 4f64.powi(big_j as i32 - 1) * layer1.lowpass_map(c, big_j).energy();
            for j in 1..=big_j {
                for l in 0..self.config.n_angles {
                    energy += 4f64.powi(j as i32 - 1) * layer1.band_map(c, j, l).energy();
                }
            }
        }
        Ok(energy / x.norm().powi(2))
    }
}
