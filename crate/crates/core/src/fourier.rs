//! Square 2D FFTs and the spectral periodization used for subsampling.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Signed angular frequency of DFT bin `k` on an `n`-point grid, in `[-pi, pi)`.
pub(crate) fn frequency(k: usize, n: usize) -> f64 {
    let signed = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
    2.0 * std::f64::consts::PI * signed / n as f64
}

/// Index of the bin holding frequency `-omega` for bin `k`.
pub(crate) fn negate(k: usize, n: usize) -> usize {
    (n - k) % n
}

/// Quarter turn counter-clockwise: `out(x, y) = in(y, -x)` with `x` the column
/// and `y` the row, indices taken modulo `n`. Works for spatial arrays and for
/// Fourier arrays alike.
pub fn rot90_ccw<T: Copy>(a: &[T], n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            out.push(a[((n - x) % n) * n + y]);
        }
    }
    out
}

/// Sum of the `factor^2` aliases of a Fourier-domain filter: the spectrum of
/// the spatial filter `factor^2 * h[factor * m]` on the coarse grid.
pub(crate) fn periodize(spec: &[f64], n: usize, factor: usize) -> Vec<f64> {
    let m = n / factor;
    let mut out = vec![0.0; m * m];
    for a in 0..factor {
        for ky in 0..m {
            let row = (ky + a * m) * n;
            for b in 0..factor {
                let src = &spec[row + b * m..row + b * m + m];
                for (o, s) in out[ky * m..(ky + 1) * m].iter_mut().zip(src) {
                    *o += s;
                }
            }
        }
    }
    out
}

/// Spectrum of `y[factor * m]` given the spectrum of `y` on an `n`-point grid.
pub(crate) fn downsample_spectrum(spec: &[Complex64], n: usize, factor: usize) -> Vec<Complex64> {
    if factor == 1 {
        return spec.to_vec();
    }
    let m = n / factor;
    let mut out = vec![Complex64::new(0.0, 0.0); m * m];
    for a in 0..factor {
        for ky in 0..m {
            let row = (ky + a * m) * n;
            for b in 0..factor {
                let src = &spec[row + b * m..row + b * m + m];
                for (o, s) in out[ky * m..(ky + 1) * m].iter_mut().zip(src) {
                    *o += s;
                }
            }
        }
    }
    let scale = 1.0 / (factor * factor) as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            buf.swap(r * n + c, c * n + r);
        }
    }
}

/// Forward/inverse plans for one square size.
#[derive(Clone)]
pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn run(&self, fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n * self.n);
        if self.n == 1 {
            return;
        }
        fft.process(buf);
        transpose(buf, self.n);
        fft.process(buf);
        transpose(buf, self.n);
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.run(&self.forward, buf);
    }

    /// Normalized inverse (divides by `n^2`).
    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.run(&self.inverse, buf);
        let scale = 1.0 / (self.n * self.n) as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Plans for every power-of-two side up to `2^max_log`.
#[derive(Clone)]
pub(crate) struct FftPlans {
    by_log: Vec<Fft2>,
}

impl FftPlans {
    pub(crate) fn new(max_log: u32) -> Self {
        let mut planner = FftPlanner::new();
        let by_log = (0..=max_log).map(|l| Fft2::new(&mut planner, 1 << l)).collect();
        Self { by_log }
    }

    pub(crate) fn get(&self, n: usize) -> &Fft2 {
        &self.by_log[n.trailing_zeros() as usize]
    }

    pub(crate) fn forward_real(&self, data: &[f64], n: usize) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.get(n).forward(&mut buf);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[f64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for ky in 0..n {
            for kx in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..n {
                    for x_ in 0..n {
                        let ph = -2.0 * std::f64::consts::PI * ((ky * y + kx * x_) % n) as f64 / n as f64;
                        acc += x[y * n + x_] * Complex64::from_polar(1.0, ph);
                    }
                }
                out[ky * n + kx] = acc;
            }
        }
        out
    }

    #[test]
    fn fft2_matches_naive_dft_and_inverts() {
        let n = 8;
        let x: Vec<f64> = (0..n * n).map(|i| ((i * 7919) % 31) as f64 - 15.0).collect();
        let plans = FftPlans::new(3);
        let mut spec = plans.forward_real(&x, n);
        let naive = naive_dft(&x, n);
        for (a, b) in spec.iter().zip(&naive) {
            assert!((a - b).norm() < 1e-9);
        }
        plans.get(n).inverse(&mut spec);
        for (a, b) in spec.iter().zip(&x) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_downsampling_equals_spatial_decimation() {
        let n = 16;
        let x: Vec<f64> = (0..n * n).map(|i| (i as f64 * 0.37).sin()).collect();
        let plans = FftPlans::new(4);
        let spec = plans.forward_real(&x, n);
        for factor in [1, 2, 4, 8] {
            let m = n / factor;
            let mut small = downsample_spectrum(&spec, n, factor);
            plans.get(m).inverse(&mut small);
            for r in 0..m {
                for c in 0..m {
                    let v = small[r * m + c];
                    assert!((v.re - x[r * factor * n + c * factor]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn periodized_filter_is_scaled_decimated_filter() {
        let n = 16;
        let plans = FftPlans::new(4);
        let h: Vec<f64> = (0..n * n).map(|i| ((i * 13) % 7) as f64).collect();
        let spec = plans.forward_real(&h, n);
        let real: Vec<f64> = spec.iter().map(|c| c.re).collect();
        let imag: Vec<f64> = spec.iter().map(|c| c.im).collect();
        let pr = periodize(&real, n, 4);
        let pi = periodize(&imag, n, 4);
        let mut coarse: Vec<Complex64> = pr.iter().zip(&pi).map(|(&a, &b)| Complex64::new(a, b)).collect();
        plans.get(4).inverse(&mut coarse);
        for r in 0..4 {
            for c in 0..4 {
                assert!((coarse[r * 4 + c].re - 16.0 * h[r * 4 * n + c * 4]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rot90_maps_frequency_bins() {
        let n = 8;
        let mut a = vec![0u8; n * n];
        // frequency (kx=1, ky=0) turns into (kx=0, ky=1)
        a[1] = 1;
        let r = rot90_ccw(&a, n);
        assert_eq!(r[n], 1);
        assert_eq!(r.iter().filter(|&&v| v == 1).count(), 1);
    }
}
