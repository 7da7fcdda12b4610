use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotoscat::datasets::synthetic_textures;
use rotoscat::pipeline::{evaluate_features, run_experiment, transform_dataset, DatasetKind, PipelineConfig};

fn synthetic_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.dataset.kind = DatasetKind::Synthetic;
    c.dataset.train_per_class = Some(12);
    c.dataset.test_per_class = Some(10);
    c.scattering.log_side = 4;
    c.selection.per_class = Some(4);
    c
}

#[test]
fn class_coded_textures_are_classified_perfectly() {
    let report = run_experiment(&synthetic_config(), "coded").unwrap();
    assert_eq!(report.mean_accuracy(), 1.0, "{}", report.to_key_values());
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    let config = synthetic_config();
    let mut all = synthetic_textures(4, 40, 4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    all.labels.shuffle(&mut rng);
    let train = all.subset(&(0..80).collect::<Vec<_>>());
    let test = all.subset(&(80..160).collect::<Vec<_>>());
    let train = transform_dataset(&train, &config.scattering).unwrap();
    let test = transform_dataset(&test, &config.scattering).unwrap();
    let report = evaluate_features(&train, &test, &config, 0).unwrap();
    assert!(report.accuracy < 0.45, "accuracy {} on shuffled labels", report.accuracy);
}

#[test]
fn identical_configs_give_identical_reports_and_reuse_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = synthetic_config();
    config.run.splits = 2;
    config.run.cache_dir = Some(dir.path().to_path_buf());
    let first = run_experiment(&config, "a").unwrap();
    let cached: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(cached.len(), 4);
    let second = run_experiment(&config, "a").unwrap();
    assert_eq!(first, second);
    assert_ne!(first.splits[0].sigma2, first.splits[1].sigma2);
}

#[test]
fn translation_only_and_order_one_variants_run() {
    for (order, roto, ols) in [(1, false, false), (2, false, true), (2, true, false)] {
        let mut config = synthetic_config();
        config.scattering.order = order;
        config.scattering.roto = roto;
        config.selection.ols = ols;
        let report = run_experiment(&config, "variant").unwrap();
        assert!(report.mean_accuracy() > 0.5, "order {order} roto {roto} ols {ols}: {}", report.to_key_values());
    }
}
