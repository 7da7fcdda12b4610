//! Runtime invariant checks of a scattering network: Littlewood-Paley bounds,
//! frame counts, equivariance, contraction and near-isometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::filterbank::{build_angular_bank_with, build_spatial_bank, validate_bank_with_eta, DEFAULT_ETA, LP_MAX_TOLERANCE};
use crate::fourier::rot90_ccw;
use crate::image::Image;
use crate::scattering::{count_frames, enumerate_frames, Boundary, ScatteringConfig, ScatteringNetwork};

/// Tolerance of exact grid symmetries.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

/// Uniform noise in `[-0.5, 0.5)`.
pub fn noise_image(side: usize, channels: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planes = (0..channels).map(|_| (0..side * side).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    Image::new(side, planes).expect("square image")
}

/// Largest absolute difference between `|x * psi_{j, l}|` rotated by a
/// quarter turn and `|rot(x) * psi_{j, l + L/2}|`.
pub fn rotation_error(network: &ScatteringNetwork, x: &Image) -> Result<f64> {
    let l = network.config().n_angles;
    let a = network.wavelet_modulus_w1(x)?;
    let b = network.wavelet_modulus_w1(&x.rotated90())?;
    let mut worst = 0.0f64;
    for c in 0..a.n_channels() {
        for j in 1..=network.config().max_scale {
            for t in 0..l {
                let map = a.band_map(c, j, t);
                let want = rot90_ccw(&map.data, map.side);
                let got = &b.band_map(c, j, (t + l / 2) % l).data;
                worst = want.iter().zip(got).map(|(u, v)| (u - v).abs()).fold(worst, f64::max);
            }
        }
    }
    Ok(worst)
}

/// Largest change of the averaged grid under a cyclic translation by the
/// averaging scale, after undoing the one-cell grid shift.
pub fn translation_error(network: &ScatteringNetwork, x: &Image) -> Result<f64> {
    let shift = 1usize << network.config().max_scale;
    let a = network.scatter(x)?;
    let b = network.scatter(&x.translated(shift, shift))?;
    let g = a.grid_side();
    let mut worst = 0.0f64;
    for i in 0..a.paths().len() {
        let (ga, gb) = (a.grid(i), b.grid(i));
        for r in 0..g {
            for c in 0..g {
                worst = worst.max((gb[((r + 1) % g) * g + (c + 1) % g] - ga[r * g + c]).abs());
            }
        }
    }
    Ok(worst)
}

/// A network whose band-pass filters are multiplied by `factor`, for
/// exercising the failure path of the checks.
pub fn network_with_scaled_bank(config: ScatteringConfig, factor: f64) -> Result<ScatteringNetwork> {
    let internal_log = match config.boundary {
        Boundary::Periodic => config.log_side,
        Boundary::Mirror => config.log_side + 1,
    };
    let mut bank = build_spatial_bank(internal_log, config.max_scale, config.n_angles, config.morlet)?;
    bank.scale_band_filters(factor);
    let angular = if config.roto && config.order >= 2 {
        Some(build_angular_bank_with(config.n_angles, config.angular_scales, config.morlet)?)
    } else {
        None
    };
    ScatteringNetwork::with_banks(config, bank, angular)
}

/// Runs every check on `pairs` random image pairs.
pub fn invariant_checks(network: &ScatteringNetwork, n_channels: usize, pairs: usize, seed: u64) -> Result<Vec<Check>> {
    let config = *network.config();
    let side = config.side();
    let mut checks = Vec::new();

    let lp = validate_bank_with_eta(network.spatial_bank(), DEFAULT_ETA);
    checks.push(Check::new(
        "littlewood-paley",
        lp.passes(),
        format!("max={:.9} band_min={:.6} (need max<=1+{LP_MAX_TOLERANCE:e}, band_min>={})", lp.max, lp.min_band, 1.0 - lp.eta),
    ));
    if let Some(angular) = network.angular_bank() {
        let m = angular.littlewood_paley_max();
        checks.push(Check::new("angular-littlewood-paley", m <= 1.0 + LP_MAX_TOLERANCE, format!("max={m:.9}")));
    }

    if config.roto && config.order >= 2 {
        let mut ok = true;
        let mut table = Vec::new();
        for j in 1..=config.max_scale {
            let q = count_frames(j, config.n_angles);
            let e = enumerate_frames(j, config.n_angles, config.angular_scales) as u64;
            ok &= q == e;
            table.push(format!("Q{j}={e}"));
        }
        checks.push(Check::new("frame-counts", ok, table.join(" ")));
    }

    let x = noise_image(side, n_channels, seed);
    if config.n_angles % 4 == 0 {
        let err = rotation_error(network, &x)?;
        checks.push(Check::new("rotation-covariance", err < SYMMETRY_TOLERANCE, format!("max_err={err:.3e}")));
    }
    if config.boundary == Boundary::Periodic {
        let err = translation_error(network, &x)?;
        checks.push(Check::new("translation-covariance", err < SYMMETRY_TOLERANCE, format!("max_err={err:.3e}")));
    }

    let mut worst_ratio = 0.0f64;
    let mut min_energy = f64::INFINITY;
    for p in 0..pairs as u64 {
        let x = noise_image(side, n_channels, seed.wrapping_add(2 * p + 1));
        let y = noise_image(side, n_channels, seed.wrapping_add(2 * p + 2));
        let dist = network.scatter(&x)?.weighted_distance(&network.scatter(&y)?);
        let input: f64 = x.planes().iter().flatten().zip(y.planes().iter().flatten()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_ratio = worst_ratio.max(dist / input);
        min_energy = min_energy.min(network.w1_energy_ratio(&x)?);
    }
    checks.push(Check::new("contraction", worst_ratio <= 1.0 + LP_MAX_TOLERANCE, format!("max_ratio={worst_ratio:.6} pairs={pairs}")));
    checks.push(Check::new("w1-energy", min_energy >= 1.0 - DEFAULT_ETA, format!("min_ratio={min_energy:.6}")));
    Ok(checks)
}
