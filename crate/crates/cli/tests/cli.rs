use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rotoscat::datasets::{cifar_record_from_image, synthetic_textures, write_cifar_records, CifarRecord};
use rotoscat::formats::FeatureFile;

fn rotoscat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotoscat"))
        .args(args)
        .env_remove("ROTOSCAT_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// CIFAR-10 style batches holding a few synthetic textures per class.
fn cifar_fixture(dir: &Path, train_per_class: usize, test_per_class: usize) {
    let records = |per_class: usize, seed: u64| -> Vec<CifarRecord> {
        let ds = synthetic_textures(10, per_class, 5, seed);
        ds.images
            .iter()
            .zip(&ds.labels)
            .map(|(img, &l)| cifar_record_from_image(img, l as u8, None).unwrap())
            .collect()
    };
    write_cifar_records(&dir.join("data_batch_1.bin"), &records(train_per_class, 1)).unwrap();
    write_cifar_records(&dir.join("test_batch.bin"), &records(test_per_class, 2)).unwrap();
}

#[test]
fn validate_prints_frame_table_and_passes() {
    let out = rotoscat(&["validate", "--pairs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for (j, q) in [(1, 9), (2, 145), (3, 409), (4, 801), (5, 1321), (6, 1969)] {
        assert!(text.contains(&format!("{j}  {q}  {q}")), "{text}");
    }
    assert!(text.contains("PASS rotation-covariance"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn validate_fails_on_broken_bank() {
    let out = rotoscat(&["validate", "--pairs", "1", "--break-bank", "1.5"]);
    assert!(!out.status.success());
    assert!(stdout(&out).contains("FAIL littlewood-paley"));
}

#[test]
fn ablate_dry_run_lists_five_configurations() {
    let out = rotoscat(&["ablate", "--dry-run"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 5);
    assert!(text.contains("trans-order1: order=1 roto=false ols=false"));
    assert!(text.contains("roto-order2-ols: order=2 roto=true ols=true"));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[run]\nseed = 5\n").unwrap();
    let text = stdout(&rotoscat(&["info", "--seed", "3", "--svm-c", "7.5", "--config", cfg.to_str().unwrap()]));
    assert!(text.contains("seed = 5"), "{text}");
    assert!(text.contains("c = 7.5"), "{text}");
}

#[test]
fn info_reports_caltech_geometry_counts() {
    let text = stdout(&rotoscat(&["info", "--log-side", "8"]));
    assert!(text.contains("order0=48 order1=2304 order2=92160"), "{text}");
}

#[test]
fn transform_is_deterministic_and_respects_order() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cifar");
    fs::create_dir(&data).unwrap();
    cifar_fixture(&data, 3, 2);
    let data = data.to_str().unwrap();
    let common = ["--data", data, "--no-strict-counts", "--train-per-class", "2", "--test-per-class", "1"];

    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec!["transform", "--out", out.to_str().unwrap()];
        args.extend(common);
        args.extend(extra);
        let o = rotoscat(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    run(&a, &[]);
    run(&b, &[]);
    run(&c, &["--order", "1"]);

    let train = FeatureFile::read(&a.join("train-0.bin")).unwrap();
    assert_eq!(train.matrix.n_rows(), 20);
    assert_eq!(train.matrix.n_cols(), 3 * 16 * (1 + 8 * 3 + 384));
    assert_eq!(fs::read(a.join("train-0.bin")).unwrap(), fs::read(b.join("train-0.bin")).unwrap());
    assert_eq!(fs::read(a.join("test-0.bin")).unwrap(), fs::read(b.join("test-0.bin")).unwrap());
    assert!(a.join("manifest-0.csv").exists());

    let first = FeatureFile::read(&c.join("train-0.bin")).unwrap();
    assert_eq!(first.matrix.n_cols(), 3 * 16 * (1 + 8 * 3));
    assert!(first.columns.iter().all(|col| col.path.order < 2));
}

#[test]
fn select_train_eval_chain_classifies_textures() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cifar");
    fs::create_dir(&data).unwrap();
    cifar_fixture(&data, 8, 3);
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let data = data.to_str().unwrap();
    let common = ["--data", data, "--no-strict-counts", "--train-per-class", "8", "--test-per-class", "3", "--per-class", "3"];

    let mut args = vec!["transform", "--out"];
    let feats = p("feats");
    args.push(&feats);
    args.extend(common);
    assert!(rotoscat(&args).status.success());

    let (train, test, basis, model) = (p("feats/train-0.bin"), p("feats/test-0.bin"), p("basis.bin"), p("model.bin"));
    let mut args = vec!["select", "--train", &train, "--out", &basis];
    args.extend(common);
    let o = rotoscat(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("selected=30"));

    let o = rotoscat(&["train", "--train", &train, "--basis", &basis, "--out", &model]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let report = p("report.txt");
    let o = rotoscat(&["eval", "--test", &test, "--basis", &basis, "--model", &model, "--report", &report]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&report).unwrap();
    let acc: f64 = text.lines().find_map(|l| l.strip_prefix("accuracy=")).unwrap().parse().unwrap();
    assert!(acc >= 0.5, "{text}");
    assert!(text.contains("n_test=30"));
}

#[test]
fn missing_dataset_is_an_error() {
    let o = rotoscat(&["run", "--data", "/nonexistent/cifar"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}
