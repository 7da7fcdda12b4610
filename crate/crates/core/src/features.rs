//! Log normalization and supervised orthogonal least squares selection.
//!
//! For every class `C` the selector greedily picks the dictionary column whose
//! residual (after removing the span of the columns already picked) is most
//! correlated with the centered class indicator, then decorrelates the rest
//! of the dictionary against it. Each selected feature is kept as an affine
//! functional of the original log-scattering coordinates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns whose residual squared norm falls below this (relative to the
/// unit-normalized dictionary) are treated as linearly dependent.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// Relative floor used for the log: `epsilon = LOG_EPSILON_RELATIVE * median`.
pub const LOG_EPSILON_RELATIVE: f64 = 1e-6;

/// Dense row-major sample matrix with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{n_rows}x{n_cols} = {} values", n_rows * n_cols),
                found: format!("{}", values.len()),
            });
        }
        if labels.len() != n_rows {
            return Err(Error::DimensionMismatch { expected: format!("{n_rows} labels"), found: format!("{}", labels.len()) });
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= n_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} outside 0..{n_classes}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite entry at row {}, column {}", i / n_cols.max(1), i % n_cols.max(1))));
        }
        Ok(Self { n_rows, n_cols, values, labels, n_classes })
    }

    /// Builds a matrix from rows of equal length.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch { expected: format!("rows of length {n_cols}"), found: format!("{}", r.len()) });
        }
        let n_rows = rows.len();
        Self::new(n_rows, n_cols, rows.concat(), labels, n_classes)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, col)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_cols.max(1)).take(self.n_rows)
    }

    pub fn with_labels(mut self, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != self.n_rows || labels.iter().any(|&c| c >= n_classes) {
            return Err(Error::InvalidArgument("labels do not fit the matrix".into()));
        }
        self.labels = labels;
        self.n_classes = n_classes;
        Ok(self)
    }

    /// Keeps only the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let values = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Self { n_rows: rows.len(), n_cols: self.n_cols, values, labels, n_classes: self.n_classes }
    }

    /// Keeps only the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let values = self.rows().flat_map(|r| cols.iter().map(move |&c| r[c])).collect();
        Self { n_rows: self.n_rows, n_cols: cols.len(), values, labels: self.labels.clone(), n_classes: self.n_classes }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `value -> log(epsilon + value)` on every entry. Negative entries are an
/// error.
pub fn log_transform(features: &FeatureMatrix, epsilon: f64) -> Result<FeatureMatrix> {
    log_transform_columns(features, epsilon, &vec![true; features.n_cols])
}

/// Log transform restricted to the columns flagged in `mask`; other columns
/// are copied unchanged.
pub fn log_transform_columns(features: &FeatureMatrix, epsilon: f64, mask: &[bool]) -> Result<FeatureMatrix> {
    let mut out = features.clone();
    log_in_place(&mut out, epsilon, mask)?;
    Ok(out)
}

/// In-place form of [`log_transform_columns`]. On error the matrix is left
/// partially transformed.
pub fn log_in_place(features: &mut FeatureMatrix, epsilon: f64, mask: &[bool]) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("log floor must be positive, got {epsilon}")));
    }
    if mask.len() != features.n_cols {
        return Err(Error::DimensionMismatch { expected: format!("{} mask entries", features.n_cols), found: format!("{}", mask.len()) });
    }
    let n_cols = features.n_cols;
    for (i, v) in features.values.iter_mut().enumerate() {
        let col = i % n_cols;
        if !mask[col] {
            continue;
        }
        if *v < 0.0 {
            return Err(Error::NegativeEntry { row: i / n_cols, col, value: *v });
        }
        *v = (epsilon + *v).ln();
    }
    Ok(())
}

/// `relative * median` of the nonzero magnitudes in the masked columns.
pub fn relative_epsilon(features: &FeatureMatrix, mask: &[bool], relative: f64) -> Result<f64> {
    let mut nonzero: Vec<f64> = features
        .values
        .iter()
        .enumerate()
        .filter(|(i, v)| mask[i % features.n_cols] && **v != 0.0)
        .map(|(_, v)| v.abs())
        .collect();
    if nonzero.is_empty() {
        return Err(Error::EmptyInput("no nonzero coefficient to set the log floor"));
    }
    let mid = nonzero.len() / 2;
    let (_, median, _) = nonzero.select_nth_unstable_by(mid, f64::total_cmp);
    Ok(relative * *median)
}

/// One selected feature: `value(x) = offset + sum_i weight_i * x[column_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub class: usize,
    /// Position in its class's selection sequence, starting at 0.
    pub rank: usize,
    /// Dictionary column chosen at this step.
    pub column: usize,
    pub offset: f64,
    pub weights: Vec<(usize, f64)>,
}

impl SelectedFeature {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.offset + self.weights.iter().map(|&(c, w)| w * x[c]).sum::<f64>()
    }
}

/// Selection trace of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSelection {
    pub class: usize,
    pub columns: Vec<usize>,
    /// Squared residual of the centered indicator before any selection
    /// (entry 0) and after each step.
    pub residuals: Vec<f64>,
    /// True when the dictionary ran out of independent columns early.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedBasis {
    pub dim: usize,
    pub features: Vec<SelectedFeature>,
    pub classes: Vec<ClassSelection>,
    /// Evaluations of every feature on the training rows (`n x M`,
    /// row-major), if kept.
    pub training: Option<Vec<f64>>,
    /// Log floor used on the wavelet columns before selection, if any.
    pub log_epsilon: Option<f64>,
}

impl SelectedBasis {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn truncated(&self) -> bool {
        self.classes.iter().any(|c| c.truncated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsOptions {
    pub per_class: usize,
    pub rank_tolerance: f64,
    pub keep_training: bool,
}

impl OlsOptions {
    pub fn new(per_class: usize) -> Self {
        Self { per_class, rank_tolerance: DEFAULT_RANK_TOLERANCE, keep_training: true }
    }
}

/// Per-column centering and scaling of the training matrix.
struct Standardization {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardization {
    fn fit(f: &FeatureMatrix) -> Self {
        let n = f.n_rows as f64;
        let mut mean = vec![0.0; f.n_cols];
        for r in f.rows() {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut sq = vec![0.0; f.n_cols];
        for r in f.rows() {
            for ((s, v), m) in sq.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = sq.into_iter().map(f64::sqrt).collect();
        Self { mean, scale }
    }

    fn column(&self, f: &FeatureMatrix, p: usize) -> Vec<f64> {
        f.rows().map(|r| (r[p] - self.mean[p]) / self.scale[p]).collect()
    }

    /// `Z^T s` for a vector `s` with zero sum.
    fn correlate(&self, f: &FeatureMatrix, s: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; f.n_cols];
        for (r, &w) in f.rows().zip(s) {
            if w != 0.0 {
                acc.iter_mut().zip(r).for_each(|(a, v)| *a += w * v);
            }
        }
        acc.iter_mut().zip(&self.scale).for_each(|(a, s)| *a = if *s > 0.0 { *a / s } else { 0.0 });
        acc
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct ClassRun {
    selection: ClassSelection,
    features: Vec<SelectedFeature>,
    evaluations: Vec<Vec<f64>>,
}

fn select_class(f: &FeatureMatrix, std: &Standardization, class: usize, options: &OlsOptions) -> ClassRun {
    let n = f.n_rows;
    let prior = f.labels.iter().filter(|&&c| c == class).count() as f64 / n as f64;
    let y: Vec<f64> = f.labels.iter().map(|&c| if c == class { 1.0 - prior } else { -prior }).collect();
    let max_scale = std.scale.iter().cloned().fold(0.0, f64::max);
    let mut active: Vec<bool> = std.scale.iter().map(|&s| s > 1e-12 * max_scale.max(f64::MIN_POSITIVE)).collect();
    // Residual correlation with y and squared residual norm of every column.
    let mut corr = std.correlate(f, &y);
    let mut rho: Vec<f64> = active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let mut residual = dot(&y, &y);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut coefs: Vec<Vec<f64>> = Vec::new();
    let mut selection = ClassSelection { class, columns: Vec::new(), residuals: vec![residual], truncated: false };
    let mut features = Vec::new();

    for step in 0..options.per_class {
        let mut best: Option<(usize, f64)> = None;
        for p in 0..f.n_cols {
            if !active[p] || rho[p] <= options.rank_tolerance {
                continue;
            }
            let score = corr[p].abs() / rho[p].sqrt();
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((p, score));
            }
        }
        let Some((p, _)) = best else {
            selection.truncated = true;
            break;
        };
        active[p] = false;

        // Orthonormalize the chosen column against the basis, twice for
        // stability, tracking its expansion over the chosen columns.
        let mut s = std.column(f, p);
        let mut t = vec![0.0; step + 1];
        t[step] = 1.0;
        for _ in 0..2 {
            for (b, tb) in basis.iter().zip(&coefs) {
                let a = dot(b, &s);
                s.iter_mut().zip(b).for_each(|(x, y)| *x -= a * y);
                t.iter_mut().zip(tb).for_each(|(x, y)| *x -= a * y);
            }
        }
        let norm = dot(&s, &s).sqrt();
        s.iter_mut().for_each(|v| *v /= norm);
        t.iter_mut().for_each(|v| *v /= norm);

        let gain = dot(&y, &s);
        residual = (residual - gain * gain).max(0.0);
        let proj = std.correlate(f, &s);
        for q in 0..f.n_cols {
            if active[q] {
                corr[q] -= proj[q] * gain;
                rho[q] -= proj[q] * proj[q];
            }
        }

        selection.columns.push(p);
        selection.residuals.push(residual);
        let weights: Vec<(usize, f64)> =
            selection.columns.iter().zip(&t).map(|(&c, &tc)| (c, tc / std.scale[c])).collect();
        let offset = -weights.iter().map(|&(c, w)| w * std.mean[c]).sum::<f64>();
        features.push(SelectedFeature { class, rank: step, column: p, offset, weights });
        basis.push(s);
        coefs.push(t);
    }
    if selection.truncated {
        log::warn!(
            "class {class}: dictionary rank exhausted after {} of {} selections",
            selection.columns.len(),
            options.per_class
        );
    }
    ClassRun { selection, features, evaluations: basis }
}

/// Selects `per_class` features for every class.
pub fn ols_select(features: &FeatureMatrix, per_class: usize) -> Result<SelectedBasis> {
    ols_select_with(features, &OlsOptions::new(per_class))
}

pub fn ols_select_with(features: &FeatureMatrix, options: &OlsOptions) -> Result<SelectedBasis> {
    if features.n_rows == 0 || features.n_cols == 0 {
        return Err(Error::EmptyInput("feature matrix"));
    }
    if options.per_class > features.n_rows.min(features.n_cols) {
        return Err(Error::InvalidArgument(format!(
            "cannot select {} features per class from a {}x{} matrix",
            options.per_class, features.n_rows, features.n_cols
        )));
    }
    for c in 0..features.n_classes {
        if !features.labels.contains(&c) {
            return Err(Error::DegenerateClass(c));
        }
    }
    let std = Standardization::fit(features);
    let runs: Vec<ClassRun> =
        (0..features.n_classes).into_par_iter().map(|c| select_class(features, &std, c, options)).collect();

    let m: usize = runs.iter().map(|r| r.features.len()).sum();
    let training = options.keep_training.then(|| {
        let mut out = vec![0.0; features.n_rows * m];
        let mut col = 0;
        for run in &runs {
            for e in &run.evaluations {
                for (i, v) in e.iter().enumerate() {
                    out[i * m + col] = *v;
                }
                col += 1;
            }
        }
        out
    });
    let mut basis =
        SelectedBasis { dim: features.n_cols, features: Vec::with_capacity(m), classes: Vec::new(), training, log_epsilon: None };
    for run in runs {
        basis.features.extend(run.features);
        basis.classes.push(run.selection);
    }
    Ok(basis)
}

/// Functionals that only center and unit-normalize every non-constant
/// column, used when no selection is wanted.
pub fn standardization_basis(features: &FeatureMatrix) -> Result<SelectedBasis> {
    if features.n_rows == 0 || features.n_cols == 0 {
        return Err(Error::EmptyInput("feature matrix"));
    }
    let std = Standardization::fit(features);
    let max_scale = std.scale.iter().cloned().fold(0.0, f64::max);
    let features_out = (0..features.n_cols)
        .filter(|&p| std.scale[p] > 1e-12 * max_scale.max(f64::MIN_POSITIVE))
        .enumerate()
        .map(|(rank, p)| {
            let w = 1.0 / std.scale[p];
            SelectedFeature { class: 0, rank, column: p, offset: -w * std.mean[p], weights: vec![(p, w)] }
        })
        .collect();
    Ok(SelectedBasis { dim: features.n_cols, features: features_out, classes: Vec::new(), training: None, log_epsilon: None })
}

/// Evaluates every selected feature on every row.
pub fn project(basis: &SelectedBasis, features: &FeatureMatrix) -> Result<FeatureMatrix> {
    if features.n_cols != basis.dim {
        return Err(Error::DimensionMismatch {
            expected: format!("{} columns", basis.dim),
            found: format!("{}", features.n_cols),
        });
    }
    let m = basis.len();
    let values: Vec<f64> = features
        .values
        .par_chunks(features.n_cols.max(1))
        .take(features.n_rows)
        .flat_map_iter(|row| basis.features.iter().map(move |f| f.evaluate(row)))
        .collect();
    FeatureMatrix::new(features.n_rows, m, values, features.labels.clone(), features.n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, d: usize, classes: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * d).map(|_| rng.random::<f64>()).collect();
        let labels = (0..n).map(|i| i % classes).collect();
        FeatureMatrix::new(n, d, values, labels, classes).unwrap()
    }

    #[test]
    fn log_of_zero_is_log_epsilon() {
        let f = FeatureMatrix::new(1, 2, vec![0.0, 1.0], vec![0], 1).unwrap();
        let g = log_transform(&f, 1e-6).unwrap();
        assert_eq!(g.get(0, 0), 1e-6f64.ln());
        assert!((g.get(0, 1) - 9.999995e-7).abs() < 1e-12);
    }

    #[test]
    fn log_rejects_negative_entries_in_masked_columns() {
        let f = FeatureMatrix::new(1, 2, vec![-1.0, 1.0], vec![0], 1).unwrap();
        assert!(matches!(log_transform(&f, 1e-6), Err(Error::NegativeEntry { row: 0, col: 0, .. })));
        let g = log_transform_columns(&f, 1e-6, &[false, true]).unwrap();
        assert_eq!(g.get(0, 0), -1.0);
    }

    #[test]
    fn relative_floor_uses_median_of_nonzeros() {
        let f = FeatureMatrix::new(1, 5, vec![0.0, 1.0, 3.0, 2.0, 100.0], vec![0], 1).unwrap();
        let eps = relative_epsilon(&f, &[true; 5], 1e-6).unwrap();
        assert!((eps - 3e-6).abs() < 1e-18);
        let eps = relative_epsilon(&f, &[true, true, false, true, false], 1e-6).unwrap();
        assert!((eps - 2e-6).abs() < 1e-18);
    }

    #[test]
    fn perfect_correlate_is_selected_first() {
        let mut f = random_matrix(40, 6, 2, 1);
        for i in 0..40 {
            f.values[i * 6 + 4] = if f.labels[i] == 0 { 1.0 } else { 0.0 };
        }
        let basis = ols_select(&f, 2).unwrap();
        for class in &basis.classes {
            assert_eq!(class.columns[0], 4);
            assert!(class.residuals[1] < 1e-12 * class.residuals[0]);
        }
    }

    #[test]
    fn training_evaluations_match_functionals_and_are_orthonormal() {
        let f = random_matrix(50, 20, 3, 2);
        let basis = ols_select(&f, 5).unwrap();
        let projected = project(&basis, &f).unwrap();
        let stored = basis.training.as_ref().unwrap();
        for (a, b) in projected.values().iter().zip(stored) {
            assert!((a - b).abs() < 1e-10);
        }
        for c in 0..3 {
            for a in 0..5 {
                for b in 0..5 {
                    let (ca, cb) = (c * 5 + a, c * 5 + b);
                    let g: f64 = (0..50).map(|i| projected.get(i, ca) * projected.get(i, cb)).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-8, "class {c}: gram[{a}][{b}] = {g}");
                }
            }
        }
    }

    #[test]
    fn residuals_do_not_increase() {
        let f = random_matrix(30, 25, 4, 3);
        let basis = ols_select(&f, 8).unwrap();
        for c in &basis.classes {
            assert!(c.residuals.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn rank_deficiency_truncates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base: Vec<f64> = (0..20).map(|_| rng.random()).collect();
        // Three columns spanning a 2D space (plus the constant removed by
        // centering).
        let values: Vec<f64> = (0..20).flat_map(|i| [base[i], 2.0 * base[i] + 1.0, (i % 2) as f64]).collect();
        let f = FeatureMatrix::new(20, 3, values, (0..20).map(|i| i % 2).collect(), 2).unwrap();
        let basis = ols_select(&f, 3).unwrap();
        assert!(basis.truncated());
        assert!(basis.classes.iter().all(|c| c.columns.len() == 2));
    }

    #[test]
    fn constant_columns_are_never_selected() {
        let mut f = random_matrix(20, 4, 2, 5);
        for i in 0..20 {
            f.values[i * 4] = 7.0;
        }
        let basis = ols_select(&f, 3).unwrap();
        assert!(basis.features.iter().all(|s| s.column != 0));
    }

    #[test]
    fn errors() {
        let f = random_matrix(10, 4, 2, 6);
        assert!(matches!(ols_select(&f, 5), Err(Error::InvalidArgument(_))));
        let g = f.clone().with_labels(vec![0; 10], 2).unwrap();
        assert!(matches!(ols_select(&g, 2), Err(Error::DegenerateClass(1))));
        let basis = ols_select(&f, 2).unwrap();
        let h = random_matrix(3, 5, 2, 7);
        assert!(matches!(project(&basis, &h), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn log_shift_under_scaling() {
        let f = random_matrix(5, 4, 1, 8);
        let lambda = 3.0;
        let scaled = FeatureMatrix::new(5, 4, f.values().iter().map(|v| v * lambda).collect(), f.labels().to_vec(), 1).unwrap();
        let a = log_transform(&f, 1e-12).unwrap();
        let b = log_transform(&scaled, 1e-12 * lambda).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((y - x - lambda.ln()).abs() < 1e-12);
        }
    }
}
