//! Fourier-domain Morlet filter banks.
//!
//! The spatial bank holds the band-pass filters `psi[j][l]` (scale `2^j`,
//! orientation `l * pi / L`) and the Gaussian low-passes `phi[j]`, all sampled
//! on the full `2^d x 2^d` DFT grid. Subsampled copies are produced later by
//! periodization. The angular bank holds the 1D circular Morlet filters used
//! along the orientation axis by the roto-translation transform.
//!
//! Every Morlet spectrum is real: the filters are built as periodized
//! Gaussians directly in the Fourier domain, with a scaled Gaussian subtracted
//! so the zero-frequency bin is exactly zero.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{frequency, negate, rot90_ccw};

/// Frame-tightness slack: the Littlewood-Paley sum must stay above `1 - ETA`
/// over the admissible band.
pub const DEFAULT_ETA: f64 = 0.2;

/// Allowed excess of the Littlewood-Paley maximum over 1.
pub const LP_MAX_TOLERANCE: f64 = 1e-6;

/// Number of `2 pi` periods summed on each side when periodizing a Gaussian.
const PERIODS: i32 = 4;

/// Terms whose exponent falls below this are skipped.
const EXP_CUTOFF: f64 = 60.0;

/// Shape constants of the Morlet wavelets and Gaussian low-passes.
///
/// At scale index `j >= 1` the wavelet has center frequency `xi * 2^-(j-1)`
/// and envelope width `sigma * 2^(j-1)`; the low-pass `phi_j` has width
/// `sigma_phi * 2^(j-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorletParams {
    pub xi: f64,
    pub sigma: f64,
    pub slant: f64,
    pub sigma_phi: f64,
}

impl Default for MorletParams {
    fn default() -> Self {
        Self { xi: 3.0 * PI / 4.0, sigma: 0.6, slant: 0.5, sigma_phi: 0.8 }
    }
}

impl MorletParams {
    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.sigma) || !ok(self.sigma_phi) || !ok(self.slant) {
            return Err(Error::DegenerateParams(format!(
                "envelope widths must be positive: sigma={}, sigma_phi={}, slant={}",
                self.sigma, self.sigma_phi, self.slant
            )));
        }
        if !ok(self.xi) || self.xi > PI {
            return Err(Error::DegenerateParams(format!("center frequency {} outside (0, pi]", self.xi)));
        }
        Ok(())
    }

    pub fn center_frequency(&self, j: u32) -> f64 {
        self.xi / f64::from(1u32 << (j - 1))
    }

    pub fn envelope(&self, j: u32) -> f64 {
        self.sigma * f64::from(1u32 << (j - 1))
    }

    pub fn lowpass_envelope(&self, j: u32) -> f64 {
        self.sigma_phi * f64::from(1u32 << (j - 1))
    }
}

/// Periodized anisotropic Gaussian `exp(-Q(w - xi e_theta) / 2)` summed over
/// `w + 2 pi n`, where `Q` has width `sigma` along `e_theta` and
/// `sigma * slant` across it.
fn periodized_gaussian_2d(n: usize, sigma: f64, theta: f64, xi: f64, slant: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    let (cx, cy) = (xi * c, xi * s);
    let along = sigma * sigma;
    let across = sigma * sigma / (slant * slant);
    let min_width = along.min(across);
    let mut out = vec![0.0; n * n];
    for ky in 0..n {
        let wy = frequency(ky, n);
        for kx in 0..n {
            let wx = frequency(kx, n);
            let mut acc = 0.0;
            for py in -PERIODS..=PERIODS {
                let dy = wy + 2.0 * PI * f64::from(py) - cy;
                for px in -PERIODS..=PERIODS {
                    let dx = wx + 2.0 * PI * f64::from(px) - cx;
                    if 0.5 * min_width * (dx * dx + dy * dy) > EXP_CUTOFF {
                        continue;
                    }
                    let u = dx * c + dy * s;
                    let v = -dx * s + dy * c;
                    acc += (-0.5 * (along * u * u + across * v * v)).exp();
                }
            }
            out[ky * n + kx] = acc;
        }
    }
    out
}

/// Zero-mean Morlet spectrum on the `n x n` grid.
fn morlet_2d(n: usize, sigma: f64, theta: f64, xi: f64, slant: f64) -> Vec<f64> {
    let wave = periodized_gaussian_2d(n, sigma, theta, xi, slant);
    let envelope = periodized_gaussian_2d(n, sigma, theta, 0.0, slant);
    let kappa = wave[0] / envelope[0];
    let mut psi: Vec<f64> = wave.iter().zip(&envelope).map(|(w, e)| w - kappa * e).collect();
    psi[0] = 0.0;
    psi
}

/// Isotropic Gaussian low-pass with unit DC gain.
fn gaussian_lowpass_2d(n: usize, sigma: f64) -> Vec<f64> {
    let mut g = periodized_gaussian_2d(n, sigma, 0.0, 0.0, 1.0);
    let dc = g[0];
    g.iter_mut().for_each(|v| *v /= dc);
    g[0] = 1.0;
    g
}

/// Symmetrized squared modulus `(|h(w)|^2 + |h(-w)|^2) / 2`, accumulated.
fn accumulate_symmetric_energy(acc: &mut [f64], filter: &[f64], n: usize) {
    for ky in 0..n {
        let my = negate(ky, n);
        for kx in 0..n {
            let mx = negate(kx, n);
            let a = filter[ky * n + kx];
            let b = filter[my * n + mx];
            acc[ky * n + kx] += 0.5 * (a * a + b * b);
        }
    }
}

/// Spatial Morlet filters `psi[j][l]` and low-passes `phi[j]`, `1 <= j <= J`.
#[derive(Debug, Clone)]
pub struct SpatialFilterBank {
    log_side: u32,
    max_scale: u32,
    n_angles: usize,
    params: MorletParams,
    gains: Vec<f64>,
    psi: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
}

impl SpatialFilterBank {
    pub fn log_side(&self) -> u32 {
        self.log_side
    }

    pub fn grid_size(&self) -> usize {
        1 << self.log_side
    }

    pub fn max_scale(&self) -> u32 {
        self.max_scale
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn params(&self) -> &MorletParams {
        &self.params
    }

    /// Squared per-scale gains applied to the raw Morlet filters.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn angle(&self, l: usize) -> f64 {
        l as f64 * PI / self.n_angles as f64
    }

    /// Fourier coefficients of `psi_{j, l pi / L}` (real, row-major).
    pub fn psi(&self, j: u32, l: usize) -> &[f64] {
        &self.psi[(j as usize - 1) * self.n_angles + l]
    }

    /// Fourier coefficients of `phi_j`.
    pub fn phi(&self, j: u32) -> &[f64] {
        &self.phi[j as usize - 1]
    }

    /// Radius of the admissible band over which the frame is near-tight: the
    /// center frequency of the finest wavelet.
    pub fn band_radius(&self) -> f64 {
        self.params.xi
    }

    pub fn band_filters(&self) -> usize {
        self.psi.len()
    }

    /// Multiplies every band-pass filter by `factor`. Used to build invalid
    /// banks for validation tests.
    pub fn scale_band_filters(&mut self, factor: f64) {
        for f in &mut self.psi {
            f.iter_mut().for_each(|v| *v *= factor);
        }
        self.gains.iter_mut().for_each(|g| *g *= factor * factor);
    }

    pub(crate) fn from_parts(
        log_side: u32,
        max_scale: u32,
        n_angles: usize,
        params: MorletParams,
        gains: Vec<f64>,
        psi: Vec<Vec<f64>>,
        phi: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = 1usize << log_side;
        if psi.len() != max_scale as usize * n_angles
            || phi.len() != max_scale as usize
            || gains.len() != max_scale as usize
            || psi.iter().chain(&phi).any(|f| f.len() != n * n)
        {
            return Err(Error::Format("filter bank arrays do not match their header".into()));
        }
        Ok(Self { log_side, max_scale, n_angles, params, gains, psi, phi })
    }

    /// Littlewood-Paley sum at every frequency bin:
    /// `|phi_J(w)|^2 + 1/2 sum_{j,l} (|psi_{j,l}(w)|^2 + |psi_{j,l}(-w)|^2)`.
    pub fn littlewood_paley(&self) -> Vec<f64> {
        let n = self.grid_size();
        let mut acc: Vec<f64> = self.phi(self.max_scale).iter().map(|v| v * v).collect();
        for f in &self.psi {
            accumulate_symmetric_energy(&mut acc, f, n);
        }
        acc
    }
}

/// Builds the spatial bank on a `2^d x 2^d` grid with `J` scales and `L`
/// orientations.
pub fn build_spatial_bank(d: u32, max_scale: u32, n_angles: usize, params: MorletParams) -> Result<SpatialFilterBank> {
    if max_scale == 0 || max_scale > d {
        return Err(Error::InvalidDims(format!("need 1 <= J <= d, got J={max_scale}, d={d}")));
    }
    if d > 12 {
        return Err(Error::InvalidDims(format!("grid 2^{d} is too large")));
    }
    if n_angles < 2 {
        return Err(Error::InvalidDims(format!("need at least 2 orientations, got {n_angles}")));
    }
    params.validate()?;
    let n = 1usize << d;

    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(max_scale as usize * n_angles);
    for j in 1..=max_scale {
        let sigma = params.envelope(j);
        let xi = params.center_frequency(j);
        let first = raw.len();
        for l in 0..n_angles {
            // A quarter turn of the grid is exact, so when L is a multiple of 4
            // the second half of the orientations is generated by rotation.
            let filter = if n_angles % 4 == 0 && l >= n_angles / 2 {
                rot90_ccw(&raw[first + l - n_angles / 2], n)
            } else {
                morlet_2d(n, sigma, l as f64 * PI / n_angles as f64, xi, params.slant)
            };
            raw.push(filter);
        }
    }
    let phi: Vec<Vec<f64>> = (1..=max_scale).map(|j| gaussian_lowpass_2d(n, params.lowpass_envelope(j))).collect();

    let gains = fit_scale_gains(&raw, &phi[max_scale as usize - 1], n, n_angles, max_scale, params.xi)?;
    let psi = raw
        .into_iter()
        .enumerate()
        .map(|(i, mut f)| {
            let g = gains[i / n_angles].sqrt();
            f.iter_mut().for_each(|v| *v *= g);
            f
        })
        .collect();
    Ok(SpatialFilterBank { log_side: d, max_scale, n_angles, params, gains, psi, phi })
}

/// Per-scale squared gains `g_j` flattening `|phi_J|^2 + sum_j g_j B_j` towards 1
/// over the admissible disk (least squares), then scaled so the sum never
/// exceeds 1 anywhere.
fn fit_scale_gains(raw: &[Vec<f64>], phi_coarse: &[f64], n: usize, n_angles: usize, scales: u32, radius: f64) -> Result<Vec<f64>> {
    let scales = scales as usize;
    let per_scale: Vec<Vec<f64>> = (0..scales)
        .map(|j| {
            let mut b = vec![0.0; n * n];
            for f in &raw[j * n_angles..(j + 1) * n_angles] {
                accumulate_symmetric_energy(&mut b, f, n);
            }
            b
        })
        .collect();
    let lowpass: Vec<f64> = phi_coarse.iter().map(|v| v * v).collect();

    let mut normal = DMatrix::<f64>::zeros(scales, scales);
    let mut rhs = DVector::<f64>::zeros(scales);
    for ky in 0..n {
        let wy = frequency(ky, n);
        for kx in 0..n {
            let wx = frequency(kx, n);
            if wx * wx + wy * wy > radius * radius {
                continue;
            }
            let idx = ky * n + kx;
            let target = 1.0 - lowpass[idx];
            for a in 0..scales {
                rhs[a] += per_scale[a][idx] * target;
                for b in 0..scales {
                    normal[(a, b)] += per_scale[a][idx] * per_scale[b][idx];
                }
            }
        }
    }
    let solution = normal
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| normal.svd(true, true).solve(&rhs, 1e-12).ok())
        .ok_or_else(|| Error::DegenerateParams("cannot fit per-scale gains".into()))?;
    let mut gains: Vec<f64> = solution.iter().map(|&g| g.max(0.0)).collect();
    if gains.iter().all(|&g| g == 0.0) {
        return Err(Error::DegenerateParams("all per-scale gains vanished".into()));
    }

    let band_sum: Vec<f64> = (0..n * n).map(|i| (0..scales).map(|j| gains[j] * per_scale[j][i]).sum()).collect();
    let peak = band_sum.iter().cloned().fold(0.0, f64::max);
    let mut scale = f64::INFINITY;
    for (s, p) in band_sum.iter().zip(&lowpass) {
        if *s > 1e-9 * peak {
            scale = scale.min(((1.0 - p).max(0.0)) / s);
        }
    }
    gains.iter_mut().for_each(|g| *g *= scale);
    Ok(gains)
}

/// Extremes of the Littlewood-Paley sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LittlewoodPaleyReport {
    pub max: f64,
    /// Minimum over the admissible disk `|w| <= band_radius`.
    pub min_band: f64,
    /// Minimum over the whole grid, corners included.
    pub min_all: f64,
    pub mean: f64,
    pub band_radius: f64,
    pub eta: f64,
}

impl LittlewoodPaleyReport {
    pub fn upper_ok(&self) -> bool {
        self.max <= 1.0 + LP_MAX_TOLERANCE
    }

    pub fn lower_ok(&self) -> bool {
        self.min_band >= 1.0 - self.eta
    }

    pub fn passes(&self) -> bool {
        self.upper_ok() && self.lower_ok()
    }
}

pub fn validate_bank(bank: &SpatialFilterBank) -> LittlewoodPaleyReport {
    validate_bank_with_eta(bank, DEFAULT_ETA)
}

pub fn validate_bank_with_eta(bank: &SpatialFilterBank, eta: f64) -> LittlewoodPaleyReport {
    let n = bank.grid_size();
    let lp = bank.littlewood_paley();
    let radius = bank.band_radius();
    let mut min_band = f64::INFINITY;
    for ky in 0..n {
        let wy = frequency(ky, n);
        for kx in 0..n {
            let wx = frequency(kx, n);
            if wx * wx + wy * wy <= radius * radius {
                min_band = min_band.min(lp[ky * n + kx]);
            }
        }
    }
    LittlewoodPaleyReport {
        max: lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        min_band,
        min_all: lp.iter().cloned().fold(f64::INFINITY, f64::min),
        mean: lp.iter().sum::<f64>() / lp.len() as f64,
        band_radius: radius,
        eta,
    }
}

/// Circular Morlet filters along the orientation axis, plus the angular
/// low-pass at the coarsest angular scale.
#[derive(Debug, Clone)]
pub struct AngularFilterBank {
    n_angles: usize,
    max_scale: u32,
    params: MorletParams,
    gain: f64,
    psi_hat: Vec<Vec<f64>>,
    phi_hat: Vec<f64>,
    psi_taps: Vec<Vec<Complex64>>,
    phi_taps: Vec<Complex64>,
}

fn periodized_gaussian_1d(n: usize, sigma: f64, xi: f64) -> Vec<f64> {
    (0..n)
        .map(|m| {
            let w = frequency(m, n);
            (-PERIODS..=PERIODS)
                .map(|p| {
                    let d = w + 2.0 * PI * f64::from(p) - xi;
                    (-0.5 * sigma * sigma * d * d).exp()
                })
                .sum()
        })
        .collect()
}

/// Circular taps `h[t] = 1/L sum_m H[m] e^{2 pi i m t / L}`.
fn inverse_dft_1d(spec: &[f64]) -> Vec<Complex64> {
    let n = spec.len();
    (0..n)
        .map(|t| {
            spec.iter()
                .enumerate()
                .map(|(m, &h)| h * Complex64::from_polar(1.0, 2.0 * PI * ((m * t) % n) as f64 / n as f64))
                .sum::<Complex64>()
                / n as f64
        })
        .collect()
}

impl AngularFilterBank {
    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn max_scale(&self) -> u32 {
        self.max_scale
    }

    pub fn params(&self) -> &MorletParams {
        &self.params
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Fourier coefficients of `psibar_k`, `1 <= k <= K`.
    pub fn psi_hat(&self, k: u32) -> &[f64] {
        &self.psi_hat[k as usize - 1]
    }

    pub fn phi_hat(&self) -> &[f64] {
        &self.phi_hat
    }

    /// Circular taps of `psibar_k` indexed by angle offset.
    pub fn psi_taps(&self, k: u32) -> &[Complex64] {
        &self.psi_taps[k as usize - 1]
    }

    pub fn phi_taps(&self) -> &[Complex64] {
        &self.phi_taps
    }

    /// Subsampling stride of the `k`-th angular band.
    pub fn stride(&self, k: u32) -> usize {
        1 << (k - 1)
    }

    pub fn lowpass_stride(&self) -> usize {
        1 << (self.max_scale - 1)
    }

    /// Largest value of `|phibar|^2 + sum_k |psibar_k|^2` over frequencies.
    pub fn littlewood_paley_max(&self) -> f64 {
        (0..self.n_angles)
            .map(|m| self.phi_hat[m].powi(2) + self.psi_hat.iter().map(|f| f[m] * f[m]).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

pub fn build_angular_bank(n_angles: usize, max_scale: u32) -> Result<AngularFilterBank> {
    build_angular_bank_with(n_angles, max_scale, MorletParams::default())
}

pub fn build_angular_bank_with(n_angles: usize, max_scale: u32, params: MorletParams) -> Result<AngularFilterBank> {
    if max_scale == 0 || max_scale >= 31 || (1usize << max_scale) >= n_angles {
        return Err(Error::InvalidAngularScale { k: max_scale, angles: n_angles });
    }
    if n_angles % (1 << (max_scale - 1)) != 0 {
        return Err(Error::InvalidDims(format!(
            "L={n_angles} is not divisible by the angular stride 2^{}",
            max_scale - 1
        )));
    }
    params.validate()?;

    let mut psi_hat: Vec<Vec<f64>> = (1..=max_scale)
        .map(|k| {
            let sigma = params.envelope(k);
            let wave = periodized_gaussian_1d(n_angles, sigma, params.center_frequency(k));
            let envelope = periodized_gaussian_1d(n_angles, sigma, 0.0);
            let kappa = wave[0] / envelope[0];
            let mut psi: Vec<f64> = wave.iter().zip(&envelope).map(|(w, e)| w - kappa * e).collect();
            psi[0] = 0.0;
            psi
        })
        .collect();
    let mut phi_hat = periodized_gaussian_1d(n_angles, params.lowpass_envelope(max_scale), 0.0);
    let dc = phi_hat[0];
    phi_hat.iter_mut().for_each(|v| *v /= dc);
    phi_hat[0] = 1.0;

    let band: Vec<f64> = (0..n_angles).map(|m| psi_hat.iter().map(|f| f[m] * f[m]).sum()).collect();
    let peak = band.iter().cloned().fold(0.0, f64::max);
    let gain = band
        .iter()
        .zip(&phi_hat)
        .filter(|(b, _)| **b > 1e-9 * peak)
        .map(|(b, p)| (1.0 - p * p).max(0.0) / b)
        .fold(f64::INFINITY, f64::min);
    if !gain.is_finite() || gain <= 0.0 {
        return Err(Error::DegenerateParams("angular filters have no usable band".into()));
    }
    let amplitude = gain.sqrt();
    psi_hat.iter_mut().for_each(|f| f.iter_mut().for_each(|v| *v *= amplitude));

    let psi_taps = psi_hat.iter().map(|f| inverse_dft_1d(f)).collect();
    let phi_taps = inverse_dft_1d(&phi_hat);
    Ok(AngularFilterBank { n_angles, max_scale, params, gain, psi_hat, phi_hat, psi_taps, phi_taps })
}
