mod common;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotoscat::classifier::{gaussian_kernel, predict, solve_binary, train, KernelRows, SmoParams, SvmParams};
use rotoscat::features::FeatureMatrix;

fn random_points(n: usize, d: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let mut y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let labels = y.iter().map(|&v| usize::from(v < 0.0)).collect();
    (FeatureMatrix::new(n, d, values, labels, 2).unwrap(), y)
}

fn dual_matrix(f: &FeatureMatrix, y: &[f64], sigma2: f64) -> DMatrix<f64> {
    DMatrix::from_fn(f.n_rows(), f.n_rows(), |i, j| y[i] * y[j] * gaussian_kernel(f.row(i), f.row(j), sigma2))
}

#[test]
fn dual_objective_matches_exact_qp_minimum() {
    for seed in 0..30 {
        let n = 4 + (seed as usize % 5);
        let (f, y) = random_points(n, 2, seed);
        let sigma2 = 0.3 + (seed % 3) as f64 * 0.4;
        let c = [0.5, 1.0, 10.0][seed as usize % 3];
        let kernel = KernelRows::new(&f, sigma2, 100, 100);
        let params = SmoParams { c, tolerance: 1e-6, ..SmoParams::default() };
        let sol = solve_binary(&kernel, &y, &params);
        assert!(sol.converged);
        let want = common::dual_qp_minimum(&dual_matrix(&f, &y, sigma2), &y, c);
        assert!((sol.objective - want).abs() < 1e-3, "seed {seed}: {} vs {want}", sol.objective);
        // Feasibility of the returned point.
        assert!(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        assert!(sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum::<f64>().abs() < 1e-9);
    }
}

#[test]
fn default_tolerance_is_within_objective_bound() {
    for seed in 40..50 {
        let (f, y) = random_points(8, 3, seed);
        let kernel = KernelRows::new(&f, 0.5, 100, 100);
        let sol = solve_binary(&kernel, &y, &SmoParams::default());
        let want = common::dual_qp_minimum(&dual_matrix(&f, &y, 0.5), &y, 1.0);
        assert!((sol.objective - want).abs() < 1e-3, "seed {seed}: {} vs {want}", sol.objective);
    }
}

#[test]
fn cached_kernel_gives_the_same_solution() {
    let (f, y) = random_points(9, 2, 77);
    let full = solve_binary(&KernelRows::new(&f, 0.4, 100, 100), &y, &SmoParams::default());
    let cached = solve_binary(&KernelRows::new(&f, 0.4, 0, 2), &y, &SmoParams::default());
    for (a, b) in full.alpha.iter().zip(&cached.alpha) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn separable_multiclass_blobs_are_classified_perfectly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let centers = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0]];
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..15 {
            values.push(center[0] + rng.random::<f64>() - 0.5);
            values.push(center[1] + rng.random::<f64>() - 0.5);
            labels.push(c);
        }
    }
    let f = FeatureMatrix::new(60, 2, values, labels.clone(), 4).unwrap();
    let model = train(&f, 1.0, &SvmParams::default()).unwrap();
    assert_eq!(predict(&model, &f).unwrap(), labels);
}
