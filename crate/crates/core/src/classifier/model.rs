//! One-versus-all Gaussian SVM.

use rayon::prelude::*;

use super::kernel::{gaussian_kernel, KernelRows, FULL_MATRIX_LIMIT};
use super::smo::{solve_binary, SmoParams};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub smo: SmoParams,
    /// Largest training set whose full kernel matrix is precomputed.
    pub full_matrix_limit: usize,
    /// Rows kept by the kernel cache above that size.
    pub cached_rows: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { smo: SmoParams::default(), full_matrix_limit: FULL_MATRIX_LIMIT, cached_rows: 2000 }
    }
}

impl SvmParams {
    pub fn with_c(c: f64) -> Self {
        Self { smo: SmoParams { c, ..SmoParams::default() }, ..Self::default() }
    }
}

/// Convergence record of one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDiagnostics {
    pub class: usize,
    pub iterations: u64,
    pub violation: f64,
    pub objective: f64,
}

/// Trained one-versus-all model.
///
/// The decision value of class `c` at `x` is
/// `sum_s coef[s][c] K(sv_s, x) + bias[c]`, with `coef = alpha * y`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    pub sigma2: f64,
    pub c: f64,
    pub n_classes: usize,
    pub dim: usize,
    /// Support vectors, row-major `n_sv x dim`.
    pub support: Vec<f64>,
    /// Signed dual coefficients, row-major `n_sv x n_classes`.
    pub coef: Vec<f64>,
    pub bias: Vec<f64>,
    pub diagnostics: Vec<BinaryDiagnostics>,
}

impl KernelModel {
    pub fn n_support(&self) -> usize {
        self.support.len() / self.dim.max(1)
    }

    pub fn support_vector(&self, s: usize) -> &[f64] {
        &self.support[s * self.dim..(s + 1) * self.dim]
    }

    /// Decision values of one query for every class.
    pub fn decision(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for s in 0..self.n_support() {
            let k = gaussian_kernel(self.support_vector(s), x, self.sigma2);
            let row = &self.coef[s * self.n_classes..(s + 1) * self.n_classes];
            out.iter_mut().zip(row).for_each(|(o, a)| *o += a * k);
        }
        out
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn train(features: &FeatureMatrix, sigma2: f64, params: &SvmParams) -> Result<KernelModel> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::DegenerateBandwidth(sigma2));
    }
    if !(params.smo.c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {}", params.smo.c)));
    }
    let n_classes = features.n_classes();
    let present = (0..n_classes).filter(|c| features.labels().contains(c)).count();
    if present < 2 {
        return Err(Error::TooFewClasses(present));
    }
    let kernel = KernelRows::new(features, sigma2, params.full_matrix_limit, params.cached_rows);
    let solutions = (0..n_classes)
        .into_par_iter()
        .map(|class| {
            let y: Vec<f64> = features.labels().iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            let sol = solve_binary(&kernel, &y, &params.smo);
            if !sol.converged {
                return Err(Error::NonConvergence { class, iterations: sol.iterations, gap: sol.violation });
            }
            Ok((sol, y))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = features.n_rows();
    let support_idx: Vec<usize> = (0..n).filter(|&i| solutions.iter().any(|(s, _)| s.alpha[i] > 0.0)).collect();
    let mut coef = Vec::with_capacity(support_idx.len() * n_classes);
    for &i in &support_idx {
        coef.extend(solutions.iter().map(|(s, y)| s.alpha[i] * y[i]));
    }
    let support = support_idx.iter().flat_map(|&i| features.row(i).iter().copied()).collect();
    let diagnostics = solutions
        .iter()
        .enumerate()
        .map(|(class, (s, _))| BinaryDiagnostics { class, iterations: s.iterations, violation: s.violation, objective: s.objective })
        .collect();
    Ok(KernelModel {
        sigma2,
        c: params.smo.c,
        n_classes,
        dim: features.n_cols(),
        support,
        coef,
        bias: solutions.iter().map(|(s, _)| s.bias).collect(),
        diagnostics,
    })
}

/// Decision values, row-major `n x n_classes`.
pub fn decision_values(model: &KernelModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    if features.n_cols() != model.dim {
        return Err(Error::DimensionMismatch { expected: format!("{} columns", model.dim), found: format!("{}", features.n_cols()) });
    }
    let rows: Vec<&[f64]> = features.rows().collect();
    Ok(rows.par_iter().flat_map_iter(|r| model.decision(r)).collect())
}

pub fn predict(model: &KernelModel, features: &FeatureMatrix) -> Result<Vec<usize>> {
    let values = decision_values(model, features)?;
    Ok(values.chunks(model.n_classes.max(1)).map(argmax).collect())
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}
