mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotoscat::features::{ols_select, project, FeatureMatrix};

fn random_instance(seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(12..=50);
    let d = rng.random_range(5..=50);
    let classes = rng.random_range(2..=4);
    let labels: Vec<usize> = (0..n).map(|i| if i < classes { i } else { rng.random_range(0..classes) }).collect();
    // Columns partly driven by the label so the selection is not arbitrary.
    let weights: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
    let values = (0..n * d).map(|k| rng.random::<f64>() + weights[k % d] * labels[k / d] as f64).collect();
    FeatureMatrix::new(n, d, values, labels, classes).unwrap()
}

#[test]
fn selection_sequence_matches_exhaustive_greedy_search() {
    for seed in 0..25 {
        let f = random_instance(seed);
        let steps = (f.n_rows().min(f.n_cols()) / 2).clamp(1, 8);
        let basis = ols_select(&f, steps).unwrap();
        for class in 0..f.n_classes() {
            let (columns, residuals) = common::greedy_selection(f.values(), f.labels(), f.n_cols(), class, steps);
            let got = &basis.classes[class];
            assert_eq!(got.columns, columns, "seed {seed} class {class}");
            for (a, b) in got.residuals.iter().zip(&residuals) {
                assert!((a - b).abs() <= 1e-9 * residuals[0], "seed {seed}: residual {a} vs {b}");
            }
        }
    }
}

#[test]
fn training_evaluations_equal_gram_schmidt_basis() {
    for seed in 100..110 {
        let f = random_instance(seed);
        let steps = (f.n_rows().min(f.n_cols()) / 2).clamp(1, 6);
        let basis = ols_select(&f, steps).unwrap();
        let projected = project(&basis, &f).unwrap();
        for class in 0..f.n_classes() {
            let columns = &basis.classes[class].columns;
            let q = common::orthonormal_basis(f.values(), f.n_rows(), f.n_cols(), columns);
            let offset = class * steps;
            for (k, qk) in q.iter().enumerate() {
                for i in 0..f.n_rows() {
                    let got = projected.get(i, offset + k);
                    assert!((got - qk[i]).abs() < 1e-8, "seed {seed} class {class} k {k} row {i}: {got} vs {}", qk[i]);
                }
            }
        }
    }
}

#[test]
fn functionals_replay_on_unseen_rows() {
    let f = random_instance(7);
    let basis = ols_select(&f, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let fresh: Vec<f64> = (0..f.n_cols()).map(|_| rng.random::<f64>()).collect();
    // The functional is the Gram-Schmidt expansion applied to the
    // standardized coordinates; recompute it from training statistics.
    let n = f.n_rows();
    let d = f.n_cols();
    let mean: Vec<f64> = (0..d).map(|p| (0..n).map(|i| f.get(i, p)).sum::<f64>() / n as f64).collect();
    let scale: Vec<f64> = (0..d).map(|p| (0..n).map(|i| (f.get(i, p) - mean[p]).powi(2)).sum::<f64>().sqrt()).collect();
    for feature in &basis.features {
        let columns = &basis.classes[feature.class].columns[..=feature.rank];
        let q = common::orthonormal_basis(f.values(), n, d, columns);
        // Solve Z_S t = q_k in least squares to recover the expansion.
        let z = nalgebra::DMatrix::from_fn(n, columns.len(), |i, c| (f.get(i, columns[c]) - mean[columns[c]]) / scale[columns[c]]);
        let t = z.svd(true, true).solve(&q[feature.rank], 1e-12).unwrap();
        let want: f64 = columns.iter().enumerate().map(|(c, &p)| t[c] * (fresh[p] - mean[p]) / scale[p]).sum();
        assert!((feature.evaluate(&fresh) - want).abs() < 1e-8);
    }
}

#[test]
fn selected_features_are_orthonormal_within_each_class() {
    let f = random_instance(11);
    let basis = ols_select(&f, 5).unwrap();
    let p = project(&basis, &f).unwrap();
    for class in 0..f.n_classes() {
        for a in 0..5 {
            for b in 0..5 {
                let dot: f64 = (0..f.n_rows()).map(|i| p.get(i, class * 5 + a) * p.get(i, class * 5 + b)).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-6);
            }
        }
    }
}
