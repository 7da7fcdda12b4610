//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls an FFT: spatial filters come from a naive inverse DFT
//! of the bank's Fourier samples and every convolution is a direct sum.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotoscat::filterbank::{AngularFilterBank, SpatialFilterBank};
use rotoscat::image::Image;
use rotoscat::scattering::{AngularBand, Path, ScatteringConfig};

pub fn noise(side: usize, channels: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planes = (0..channels).map(|_| (0..side * side).map(|_| rng.random::<f64>()).collect()).collect();
    Image::new(side, planes).unwrap()
}

/// `(1 / n^2) sum_k spec[k] exp(2 pi i k.x / n)`, rows first then columns.
pub fn idft2(spec: &[f64], n: usize) -> Vec<Complex64> {
    let twiddle: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect();
    let mut rows = vec![Complex64::new(0.0, 0.0); n * n];
    for ky in 0..n {
        for x in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for kx in 0..n {
                acc += spec[ky * n + kx] * twiddle[(kx * x) % n];
            }
            rows[ky * n + x] = acc;
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for y in 0..n {
        for x in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for ky in 0..n {
                acc += rows[ky * n + x] * twiddle[(ky * y) % n];
            }
            out[y * n + x] = acc / (n * n) as f64;
        }
    }
    out
}

/// `(1 / n) sum_k spec[k] exp(2 pi i k t / n)`.
pub fn idft1(spec: &[f64]) -> Vec<Complex64> {
    let n = spec.len();
    (0..n)
        .map(|t| {
            spec.iter().enumerate().map(|(k, &v)| v * Complex64::from_polar(1.0, 2.0 * PI * (k * t) as f64 / n as f64)).sum::<Complex64>()
                / n as f64
        })
        .collect()
}

/// Filter taps for a signal sampled every `s` pixels: `s^2 h[s m]`.
pub fn coarse_taps(h: &[Complex64], n: usize, s: usize) -> Vec<Complex64> {
    let m = n / s;
    let mut out = Vec::with_capacity(m * m);
    for y in 0..m {
        for x in 0..m {
            out.push(h[(s * y) * n + s * x] * (s * s) as f64);
        }
    }
    out
}

/// `(u * h)[factor p]` on an `m x m` periodic grid, by direct summation.
pub fn conv_decimate(u: &[Complex64], h: &[Complex64], m: usize, factor: usize) -> Vec<Complex64> {
    let o = m / factor;
    let mut out = vec![Complex64::new(0.0, 0.0); o * o];
    for py in 0..o {
        for px in 0..o {
            let (cy, cx) = (py * factor, px * factor);
            let mut acc = Complex64::new(0.0, 0.0);
            for vy in 0..m {
                let hy = (cy + m - vy) % m;
                for vx in 0..m {
                    acc += u[vy * m + vx] * h[hy * m + (cx + m - vx) % m];
                }
            }
            out[py * o + px] = acc;
        }
    }
    out
}

fn complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

fn modulus(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.norm()).collect()
}

/// Spatial taps of every filter of a bank.
pub struct SpatialTaps {
    pub n: usize,
    pub psi: Vec<Vec<Vec<Complex64>>>,
    pub phi_j: Vec<Complex64>,
}

impl SpatialTaps {
    pub fn new(bank: &SpatialFilterBank) -> Self {
        let n = bank.grid_size();
        let psi = (1..=bank.max_scale())
            .map(|j| (0..bank.n_angles()).map(|l| idft2(bank.psi(j, l), n)).collect())
            .collect();
        Self { n, psi, phi_j: idft2(bank.phi(bank.max_scale()), n) }
    }

    pub fn psi(&self, j: u32, l: usize) -> &[Complex64] {
        &self.psi[j as usize - 1][l]
    }
}

/// `|x * psi_{j, l}|` sampled every `2^{j-1}` pixels.
pub fn w1(taps: &SpatialTaps, plane: &[f64], j: u32, l: usize) -> Vec<f64> {
    modulus(&conv_decimate(&complex(plane), taps.psi(j, l), taps.n, 1 << (j - 1)))
}

/// `Re(u * phi_J)` sampled every `2^J` pixels, for `u` sampled every `2^r`.
pub fn average(taps: &SpatialTaps, u: &[f64], r: u32, big_j: u32) -> Vec<f64> {
    let s = 1usize << r;
    let h = coarse_taps(&taps.phi_j, taps.n, s);
    conv_decimate(&complex(u), &h, taps.n / s, 1 << (big_j - r)).iter().map(|z| z.re).collect()
}

/// `(u_theta * psi_{j2, beta})` sampled every `2^{j2-1}` pixels, for every
/// orientation `theta` of a first-order map at scale `j1`.
pub fn spatial_second(taps: &SpatialTaps, u: &[Vec<f64>], j1: u32, j2: u32, beta: usize) -> Vec<Vec<Complex64>> {
    let s = 1usize << (j1 - 1);
    let h = coarse_taps(taps.psi(j2, beta), taps.n, s);
    u.iter().map(|ut| conv_decimate(&complex(ut), &h, taps.n / s, 1 << (j2 - j1))).collect()
}

/// Angular stride of a band for `K` angular scales.
pub fn band_stride(band: AngularBand, k_max: u32) -> usize {
    match band {
        AngularBand::None => 1,
        AngularBand::Lowpass => 1 << (k_max - 1),
        AngularBand::Wavelet(k) => 1 << (k - 1),
    }
}

/// Angular taps from the Fourier samples of the angular bank.
pub fn angular_taps(bank: &AngularFilterBank, band: AngularBand) -> Vec<Complex64> {
    match band {
        AngularBand::Lowpass => idft1(bank.phi_hat()),
        AngularBand::Wavelet(k) => idft1(bank.psi_hat(k)),
        AngularBand::None => panic!("no angular filter"),
    }
}

/// `|sum_theta y_theta a[(t - theta) mod L]|` at orientation `t`.
pub fn angular_modulus(y: &[Vec<Complex64>], a: &[Complex64], t: usize) -> Vec<f64> {
    let l = y.len();
    let mut z = vec![Complex64::new(0.0, 0.0); y[0].len()];
    for (theta, yt) in y.iter().enumerate() {
        let w = a[(t + l - theta) % l];
        z.iter_mut().zip(yt).for_each(|(acc, v)| *acc += v * w);
    }
    modulus(&z)
}

/// Every averaged coefficient grid of a periodic network, by direct
/// convolution, with its path.
pub fn scatter(
    config: &ScatteringConfig,
    taps: &SpatialTaps,
    angular: Option<&AngularFilterBank>,
    image: &Image,
) -> Vec<(Path, Vec<f64>)> {
    let big_j = config.max_scale;
    let l = config.n_angles;
    let bands: Vec<AngularBand> = if config.roto {
        std::iter::once(AngularBand::Lowpass).chain((1..=config.angular_scales).map(AngularBand::Wavelet)).collect()
    } else {
        vec![AngularBand::None]
    };
    let angular_taps: Vec<Vec<Complex64>> =
        bands.iter().map(|&b| if b == AngularBand::None { Vec::new() } else { angular_taps(angular.unwrap(), b) }).collect();

    let mut out = Vec::new();
    for (c, plane) in image.planes().iter().enumerate() {
        let c = c as u32;
        out.push((Path::order0(c), average(taps, plane, 0, big_j)));
        let u: Vec<Vec<Vec<f64>>> = (1..=big_j).map(|j| (0..l).map(|t| w1(taps, plane, j, t)).collect()).collect();
        for j in 1..=big_j {
            for t in 0..l {
                out.push((Path::order1(c, j, t as u32), average(taps, &u[j as usize - 1][t], j - 1, big_j)));
            }
        }
        if config.order < 2 {
            continue;
        }
        for j1 in 1..big_j {
            for j2 in j1 + 1..=big_j {
                for beta in 0..l {
                    let y = spatial_second(taps, &u[j1 as usize - 1], j1, j2, beta);
                    for (b, &band) in bands.iter().enumerate() {
                        let stride = band_stride(band, config.angular_scales);
                        for t in (0..l).step_by(stride) {
                            let frame = if band == AngularBand::None { modulus(&y[t]) } else { angular_modulus(&y, &angular_taps[b], t) };
                            out.push((Path::order2(c, j1, t as u32, j2, beta as u32, band), average(taps, &frame, j2 - 1, big_j)));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Largest absolute difference divided by the largest reference magnitude.
pub fn relative_error(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

/// Centered, unit-norm columns of a row-major `n x d` matrix; constant
/// columns become `None`.
pub fn standardized_columns(values: &[f64], n: usize, d: usize) -> Vec<Option<DVector<f64>>> {
    (0..d)
        .map(|p| {
            let col = DVector::from_iterator(n, (0..n).map(|i| values[i * d + p]));
            let centered = col.add_scalar(-col.mean());
            let norm = centered.norm();
            (norm > 1e-12).then(|| centered / norm)
        })
        .collect()
}

/// Squared residual of `y` after least-squares fitting on `cols`.
pub fn ls_residual(cols: &[&DVector<f64>], y: &DVector<f64>) -> f64 {
    if cols.is_empty() {
        return y.norm_squared();
    }
    let a = DMatrix::from_columns(&cols.iter().map(|c| (*c).clone()).collect::<Vec<_>>());
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(y, 1e-12).unwrap();
    (y - a * coef).norm_squared()
}

/// Greedy forward selection of `steps` columns minimizing the least-squares
/// residual of the centered indicator of `class`, recomputed from scratch
/// for every candidate. Returns the columns and the residual after each step
/// (with the initial residual first).
pub fn greedy_selection(values: &[f64], labels: &[usize], d: usize, class: usize, steps: usize) -> (Vec<usize>, Vec<f64>) {
    let n = labels.len();
    let cols = standardized_columns(values, n, d);
    let prior = labels.iter().filter(|&&c| c == class).count() as f64 / n as f64;
    let y = DVector::from_iterator(n, labels.iter().map(|&c| if c == class { 1.0 - prior } else { -prior }));
    let mut chosen: Vec<usize> = Vec::new();
    let mut residuals = vec![y.norm_squared()];
    for _ in 0..steps {
        let mut best: Option<(usize, f64)> = None;
        for p in 0..d {
            let Some(col) = &cols[p] else { continue };
            if chosen.contains(&p) {
                continue;
            }
            let mut set: Vec<&DVector<f64>> = chosen.iter().map(|&c| cols[c].as_ref().unwrap()).collect();
            set.push(col);
            let r = ls_residual(&set, &y);
            if best.is_none_or(|(_, b)| r < b - 1e-12) {
                best = Some((p, r));
            }
        }
        let Some((p, r)) = best else { break };
        chosen.push(p);
        residuals.push(r);
    }
    (chosen, residuals)
}

/// Gram-Schmidt basis of the standardized columns, in order, with positive
/// coefficients on each new column (the thin QR factor with positive
/// diagonal).
pub fn orthonormal_basis(values: &[f64], n: usize, d: usize, columns: &[usize]) -> Vec<DVector<f64>> {
    let cols = standardized_columns(values, n, d);
    let a = DMatrix::from_columns(&columns.iter().map(|&c| cols[c].clone().unwrap()).collect::<Vec<_>>());
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    (0..columns.len()).map(|i| q.column(i).into_owned() * r[(i, i)].signum()).collect()
}

/// Exact minimum of `1/2 a^T Q a - e^T a` subject to `0 <= a <= C` and
/// `y^T a = 0`, by enumerating which variables sit at 0, at C, or free.
pub fn dual_qp_minimum(q: &DMatrix<f64>, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    assert!(n <= 10, "face enumeration is exponential");
    let objective = |a: &DVector<f64>| 0.5 * (a.transpose() * q * a)[(0, 0)] - a.sum();
    let mut best = f64::INFINITY;
    let mut state = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut a = DVector::from_iterator(n, state.iter().map(|&s| if s == 1 { c } else { 0.0 }));
        let feasible = if free.is_empty() {
            (0..n).map(|i| y[i] * a[i]).sum::<f64>().abs() < 1e-9
        } else {
            let k = free.len();
            let mut m = DMatrix::zeros(k + 1, k + 1);
            let mut rhs = DVector::zeros(k + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    m[(r, s)] = q[(i, j)];
                }
                m[(r, k)] = y[i];
                m[(k, r)] = y[i];
                rhs[r] = 1.0 - (0..n).filter(|j| state[*j] == 1).map(|j| q[(i, j)] * c).sum::<f64>();
            }
            rhs[k] = -(0..n).filter(|j| state[*j] == 1).map(|j| y[j] * c).sum::<f64>();
            match m.lu().solve(&rhs) {
                Some(sol) => {
                    for (r, &i) in free.iter().enumerate() {
                        a[i] = sol[r];
                    }
                    free.iter().all(|&i| a[i] >= -1e-9 && a[i] <= c + 1e-9)
                }
                None => false,
            }
        };
        if feasible {
            best = best.min(objective(&a));
        }
        let mut i = 0;
        while i < n && state[i] == 2 {
            state[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
        state[i] += 1;
    }
}

/// Bilinear sample with half-pixel centers and edge clamping, straight from
/// the interpolation formula.
pub fn bilinear_reference(plane: &[f64], width: usize, height: usize, out: usize, ox: usize, oy: usize) -> f64 {
    let sx = ((ox as f64 + 0.5) * width as f64 / out as f64 - 0.5).clamp(0.0, (width - 1) as f64);
    let sy = ((oy as f64 + 0.5) * height as f64 / out as f64 - 0.5).clamp(0.0, (height - 1) as f64);
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
    let at = |x: usize, y: usize| plane[y * width + x];
    (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x1, y0)) + fy * ((1.0 - fx) * at(x0, y1) + fx * at(x1, y1))
}
