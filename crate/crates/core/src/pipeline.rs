//! End-to-end pipeline: dataset loading, cached scattering transforms, log
//! normalization, feature selection, SVM training and evaluation.

use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{accuracy, estimate_bandwidth, predict, train, BandwidthRule, KernelModel, SmoParams, SvmParams};
use crate::datasets::{
    load_cifar, load_cifar_file, load_image_dir, rgb_to_yuv, sample_per_class, split_train_test, synthetic_textures, AspectMode,
    CifarSplit, CifarVariant, ImageDirOptions, LabeledDataset, DEFAULT_EXCLUDED_CLASSES,
};
use crate::error::{Error, Result};
use crate::features::{
    log_in_place, ols_select_with, project, relative_epsilon, standardization_basis, OlsOptions, SelectedBasis, LOG_EPSILON_RELATIVE,
};
use crate::filterbank::MorletParams;
use crate::formats::{cache_key, columns_for, FeatureFile, FORMAT_VERSION};
use crate::image::Image;
use crate::scattering::{default_angular_scales, Boundary, ScatteringConfig, ScatteringNetwork};

/// Environment variable naming the cache directory.
pub const CACHE_DIR_ENV: &str = "ROTOSCAT_CACHE_DIR";

/// Number of selected features on CIFAR-10 at the default geometry; other
/// geometries scale it with the scattering dimension.
pub const REFERENCE_FEATURES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Cifar10,
    Cifar100,
    ImageDir,
    /// Generated oriented textures, for smoke tests and demos.
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    #[default]
    Yuv,
    Rgb,
    Gray,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub path: Option<PathBuf>,
    /// Training images per class; `None` keeps the whole canonical split.
    pub train_per_class: Option<usize>,
    /// Test images per class; `None` keeps the whole canonical split (or
    /// every non-training image for directory corpora).
    pub test_per_class: Option<usize>,
    /// Require the canonical CIFAR split sizes.
    pub strict_counts: bool,
    pub exclude: Vec<String>,
    pub aspect: AspectMode,
    /// Class count of synthetic datasets.
    pub synthetic_classes: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Cifar10,
            path: None,
            train_per_class: Some(500),
            test_per_class: Some(200),
            strict_counts: true,
            exclude: DEFAULT_EXCLUDED_CLASSES.iter().map(|s| s.to_string()).collect(),
            aspect: AspectMode::Stretch,
            synthetic_classes: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatteringSection {
    pub log_side: u32,
    /// `None` means `d - 2`.
    pub max_scale: Option<u32>,
    pub n_angles: usize,
    /// `None` means `2^K = L / 2`.
    pub angular_scales: Option<u32>,
    pub order: u8,
    pub roto: bool,
    pub boundary: Boundary,
    pub color: ColorSpace,
    pub morlet: MorletParams,
}

impl Default for ScatteringSection {
    fn default() -> Self {
        let c = ScatteringConfig::for_side(5);
        Self {
            log_side: c.log_side,
            max_scale: None,
            n_angles: c.n_angles,
            angular_scales: None,
            order: c.order,
            roto: c.roto,
            boundary: c.boundary,
            color: ColorSpace::Yuv,
            morlet: c.morlet,
        }
    }
}

impl ScatteringSection {
    pub fn network_config(&self) -> ScatteringConfig {
        ScatteringConfig {
            log_side: self.log_side,
            max_scale: self.max_scale.unwrap_or(self.log_side.saturating_sub(2).max(1)),
            n_angles: self.n_angles,
            angular_scales: self.angular_scales.unwrap_or_else(|| default_angular_scales(self.n_angles)),
            order: self.order,
            roto: self.roto,
            boundary: self.boundary,
            morlet: self.morlet,
        }
    }

    pub fn n_channels(&self) -> usize {
        match self.color {
            ColorSpace::Gray => 1,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Run orthogonal least squares; otherwise every standardized
    /// coefficient goes to the classifier.
    pub ols: bool,
    /// Total number of selected features `M`.
    pub features: Option<usize>,
    /// Features per class; overrides `features`.
    pub per_class: Option<usize>,
    pub epsilon_relative: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { ols: true, features: None, per_class: None, epsilon_relative: LOG_EPSILON_RELATIVE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub bandwidth: BandwidthRule,
    pub tolerance: f64,
    pub max_iterations: u64,
    pub full_matrix_limit: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        let s = SmoParams::default();
        let p = SvmParams::default();
        Self {
            c: s.c,
            bandwidth: BandwidthRule::MeanNorm,
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            full_matrix_limit: p.full_matrix_limit,
        }
    }
}

impl SvmConfig {
    pub fn params(&self) -> SvmParams {
        SvmParams {
            smo: SmoParams { c: self.c, tolerance: self.tolerance, max_iterations: self.max_iterations, shrinking: true },
            full_matrix_limit: self.full_matrix_limit,
            ..SvmParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Number of random splits to average (directory corpora and synthetic
    /// data; CIFAR has one canonical split).
    pub splits: usize,
    pub threads: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 0, splits: 1, threads: None, cache_dir: None }
    }
}

/// Every tunable of a run. Serializes to and from TOML.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub scattering: ScatteringSection,
    pub selection: SelectionConfig,
    pub svm: SvmConfig,
    pub run: RunConfig,
}

fn deep_merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overwrites the keys present in `text`, leaving the others unchanged.
    pub fn merge_toml(&self, text: &str) -> Result<Self> {
        let over: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut base = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        deep_merge(&mut base, over);
        base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scattering.network_config().validate()?;
        if matches!(self.dataset.kind, DatasetKind::Cifar10 | DatasetKind::Cifar100 | DatasetKind::ImageDir) && self.dataset.path.is_none() {
            return Err(Error::Config("dataset.path is required for this dataset kind".into()));
        }
        if matches!(self.dataset.kind, DatasetKind::Cifar10 | DatasetKind::Cifar100) && self.scattering.log_side != 5 {
            return Err(Error::Config("CIFAR images are 32x32: scattering.log_side must be 5".into()));
        }
        if self.run.splits == 0 {
            return Err(Error::Config("run.splits must be at least 1".into()));
        }
        if !(self.svm.c > 0.0) {
            return Err(Error::Config("svm.c must be positive".into()));
        }
        Ok(())
    }

    /// Cache directory: the configured one, else the environment variable.
    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.run.cache_dir.clone().or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
    }

    /// Hash of everything that determines the scattering features of one
    /// split.
    pub fn transform_key(&self, split: usize) -> String {
        let d = &self.dataset;
        let s = &self.scattering;
        let key = format!(
            "features|v{FORMAT_VERSION}|{:?}|{:?}|{:?}|{:?}|{}|{:?}|{:?}|{}|{:?}|{:?}|seed={}|split={split}",
            d.kind,
            d.path,
            d.train_per_class,
            d.test_per_class,
            d.strict_counts,
            d.exclude,
            d.aspect,
            d.synthetic_classes,
            s.network_config(),
            s.color,
            self.run.seed,
        );
        cache_key(&key)
    }
}

/// Applies the configured color handling to an RGB (or gray) image.
pub fn prepare_image(image: &Image, color: ColorSpace) -> Result<Image> {
    match (color, image.n_channels()) {
        (ColorSpace::Yuv, 3) => rgb_to_yuv(image),
        (ColorSpace::Rgb, 3) => Ok(image.clone()),
        (ColorSpace::Gray, 1) => Ok(image.clone()),
        (ColorSpace::Gray, 3) => {
            let yuv = rgb_to_yuv(image)?;
            Image::new(image.side(), vec![yuv.channel(0).to_vec()])
        }
        (_, found) => Err(Error::ChannelCount { expected: 3, found }),
    }
}

/// Training and test sets of one split.
pub fn load_split(config: &PipelineConfig, split: usize) -> Result<(LabeledDataset, LabeledDataset)> {
    let d = &config.dataset;
    let seed = config.run.seed.wrapping_add(split as u64);
    let subset = |ds: LabeledDataset, n: Option<usize>, seed: u64| match n {
        Some(n) => sample_per_class(&ds, n, seed),
        None => Ok(ds),
    };
    match d.kind {
        DatasetKind::Cifar10 | DatasetKind::Cifar100 => {
            let variant = if d.kind == DatasetKind::Cifar10 { CifarVariant::Ten } else { CifarVariant::Hundred };
            let dir = d.path.as_ref().ok_or_else(|| Error::Config("dataset.path is required".into()))?;
            let (train, test) = if d.strict_counts {
                (load_cifar(dir, variant, CifarSplit::Train)?, load_cifar(dir, variant, CifarSplit::Test)?)
            } else {
                load_cifar_loose(dir, variant)?
            };
            Ok((subset(train, d.train_per_class, seed)?, subset(test, d.test_per_class, seed.wrapping_add(1 << 32))?))
        }
        DatasetKind::ImageDir => {
            let dir = d.path.as_ref().ok_or_else(|| Error::Config("dataset.path is required".into()))?;
            let options = ImageDirOptions { log_side: config.scattering.log_side, aspect: d.aspect, exclude: d.exclude.clone() };
            let loaded = load_image_dir(dir, &options)?;
            if !loaded.skipped.is_empty() {
                log::warn!("{} unreadable images skipped", loaded.skipped.len());
            }
            let (train, test) = split_train_test(&loaded.dataset, d.train_per_class.unwrap_or(30), seed)?;
            Ok((train, subset(test, d.test_per_class, seed)?))
        }
        DatasetKind::Synthetic => {
            let train_n = d.train_per_class.unwrap_or(20);
            let test_n = d.test_per_class.unwrap_or(10);
            let all = synthetic_textures(d.synthetic_classes, train_n + test_n, config.scattering.log_side, config.run.seed);
            split_train_test(&all, train_n, seed)
        }
    }
}

/// CIFAR batches without the canonical size check: every `data_batch_*`
/// (or `train.bin`) present is training data.
fn load_cifar_loose(dir: &FsPath, variant: CifarVariant) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train_names, test_name): (Vec<String>, &str) = match variant {
        CifarVariant::Ten => ((1..=5).map(|i| format!("data_batch_{i}.bin")).collect(), "test_batch.bin"),
        CifarVariant::Hundred => (vec!["train.bin".into()], "test.bin"),
    };
    let mut train: Option<LabeledDataset> = None;
    for name in train_names {
        let p = dir.join(name);
        if !p.exists() {
            continue;
        }
        let part = load_cifar_file(&p, variant)?;
        match &mut train {
            None => train = Some(part),
            Some(t) => {
                t.images.extend(part.images);
                t.labels.extend(part.labels);
                t.sources.extend(part.sources);
            }
        }
    }
    let train = train.ok_or(Error::EmptyInput("no CIFAR training batch found"))?;
    Ok((train, load_cifar_file(&dir.join(test_name), variant)?))
}

/// Scattering features of every image, in dataset order.
pub fn transform_dataset(ds: &LabeledDataset, section: &ScatteringSection) -> Result<FeatureFile> {
    let config = section.network_config();
    let network = ScatteringNetwork::new(config)?;
    let n_channels = section.n_channels();
    let paths = crate::scattering::enumerate_paths(&config, n_channels);
    let rows: Vec<Vec<f64>> = ds
        .images
        .par_iter()
        .map(|img| Ok(network.scatter(&prepare_image(img, section.color)?)?.into_values()))
        .collect::<Result<_>>()?;
    let matrix = crate::features::FeatureMatrix::from_rows(rows, ds.labels.clone(), ds.n_classes())?;
    let matrix = if matrix.n_rows() == 0 {
        crate::features::FeatureMatrix::new(0, config.output_dim(n_channels), Vec::new(), Vec::new(), ds.n_classes())?
    } else {
        matrix
    };
    Ok(FeatureFile {
        config,
        n_channels,
        columns: columns_for(&paths, config.grid_side()),
        matrix,
        class_names: ds.class_names.clone(),
    })
}

/// Features of one split, read from or written to the cache when one is
/// configured.
pub fn split_features(config: &PipelineConfig, split: usize) -> Result<(FeatureFile, FeatureFile)> {
    let cache = config.cache_dir();
    let key = config.transform_key(split);
    let paths = cache.as_ref().map(|dir| {
        let stem = &key[..16];
        (dir.join(format!("features-{stem}-train.bin")), dir.join(format!("features-{stem}-test.bin")))
    });
    if let Some((train_path, test_path)) = &paths {
        if train_path.exists() && test_path.exists() {
            if let (Ok(train), Ok(test)) = (FeatureFile::read(train_path), FeatureFile::read(test_path)) {
                log::info!("using cached features {}", train_path.display());
                return Ok((train, test));
            }
            log::warn!("ignoring unreadable cached features {}", train_path.display());
        }
    }
    let (train_ds, test_ds) = load_split(config, split)?;
    let train = transform_dataset(&train_ds, &config.scattering)?;
    let test = transform_dataset(&test_ds, &config.scattering)?;
    if let Some((train_path, test_path)) = &paths {
        train.write(train_path)?;
        test.write(test_path)?;
    }
    Ok((train, test))
}

/// Default `M` for a scattering dimension: [`REFERENCE_FEATURES`] scaled by
/// the ratio to the default CIFAR-10 dimension.
pub fn default_feature_count(dim: usize) -> usize {
    let reference = ScatteringConfig::for_side(5).output_dim(3);
    ((REFERENCE_FEATURES as f64 * dim as f64 / reference as f64).round() as usize).max(1)
}

/// Selected features per class for a training matrix, capped so the total
/// stays at most half the number of training samples.
pub fn features_per_class(selection: &SelectionConfig, n_rows: usize, dim: usize, n_classes: usize) -> usize {
    let wanted = selection
        .per_class
        .unwrap_or_else(|| (selection.features.unwrap_or_else(|| default_feature_count(dim)) / n_classes.max(1)).max(1));
    // Selecting as many functionals as training samples makes every
    // training point equidistant, so keep the total at half the sample count.
    let cap = (n_rows / (2 * n_classes.max(1))).max(1).min(dim);
    if wanted > cap {
        log::warn!("reducing features per class from {wanted} to {cap}");
    }
    wanted.min(cap)
}

/// Log floor and selected basis fitted on training features.
pub fn fit_selection(train: &FeatureFile, selection: &SelectionConfig) -> Result<SelectedBasis> {
    let mask = train.wavelet_mask();
    let epsilon = relative_epsilon(&train.matrix, &mask, selection.epsilon_relative)?;
    let mut logged = train.matrix.clone();
    log_in_place(&mut logged, epsilon, &mask)?;
    let mut basis = if selection.ols {
        let per_class = features_per_class(selection, logged.n_rows(), logged.n_cols(), logged.n_classes());
        ols_select_with(&logged, &OlsOptions { keep_training: false, ..OlsOptions::new(per_class) })?
    } else {
        standardization_basis(&logged)?
    };
    basis.log_epsilon = Some(epsilon);
    Ok(basis)
}

/// Log-normalizes a feature file with the basis' floor and evaluates the
/// basis functionals.
pub fn reduce(file: &FeatureFile, basis: &SelectedBasis) -> Result<crate::features::FeatureMatrix> {
    let epsilon = basis.log_epsilon.ok_or_else(|| Error::InvalidArgument("basis carries no log floor".into()))?;
    let mut logged = file.matrix.clone();
    log_in_place(&mut logged, epsilon, &file.wavelet_mask())?;
    project(basis, &logged)
}

pub fn fit_model(reduced: &crate::features::FeatureMatrix, svm: &SvmConfig) -> Result<KernelModel> {
    let sigma2 = estimate_bandwidth(reduced, svm.bandwidth)?;
    train(reduced, sigma2, &svm.params())
}

/// Outcome of one train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub split: usize,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub scattering_dim: usize,
    pub reduced_dim: usize,
    pub sigma2: f64,
    pub support_vectors: usize,
}

/// Selection, training and test accuracy on precomputed features.
pub fn evaluate_features(train_file: &FeatureFile, test_file: &FeatureFile, config: &PipelineConfig, split: usize) -> Result<SplitReport> {
    if train_file.columns != test_file.columns {
        return Err(Error::DimensionMismatch { expected: "train and test features of one network".into(), found: "different column tables".into() });
    }
    let basis = fit_selection(train_file, &config.selection)?;
    let reduced_train = reduce(train_file, &basis)?;
    let reduced_test = reduce(test_file, &basis)?;
    let model = fit_model(&reduced_train, &config.svm)?;
    let predicted = predict(&model, &reduced_test)?;
    Ok(SplitReport {
        split,
        accuracy: accuracy(&predicted, reduced_test.labels()),
        n_train: reduced_train.n_rows(),
        n_test: reduced_test.n_rows(),
        scattering_dim: train_file.matrix.n_cols(),
        reduced_dim: reduced_train.n_cols(),
        sigma2: model.sigma2,
        support_vectors: model.n_support(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub splits: Vec<SplitReport>,
}

impl ExperimentReport {
    pub fn mean_accuracy(&self) -> f64 {
        self.splits.iter().map(|s| s.accuracy).sum::<f64>() / self.splits.len().max(1) as f64
    }

    /// Flat `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = format!("experiment={}\nmean_accuracy={:.6}\nsplits={}\n", self.name, self.mean_accuracy(), self.splits.len());
        for s in &self.splits {
            let p = format!("split{}", s.split);
            out += &format!(
                "{p}.accuracy={:.6}\n{p}.n_train={}\n{p}.n_test={}\n{p}.scattering_dim={}\n{p}.reduced_dim={}\n{p}.sigma2={:.6e}\n{p}.support_vectors={}\n",
                s.accuracy, s.n_train, s.n_test, s.scattering_dim, s.reduced_dim, s.sigma2, s.support_vectors
            );
        }
        out
    }
}

/// Runs every configured split end to end.
pub fn run_experiment(config: &PipelineConfig, name: &str) -> Result<ExperimentReport> {
    config.validate()?;
    let splits = match config.dataset.kind {
        DatasetKind::Cifar10 | DatasetKind::Cifar100 => 1,
        _ => config.run.splits,
    };
    let mut reports = Vec::with_capacity(splits);
    for split in 0..splits {
        let (train, test) = split_features(config, split)?;
        let report = evaluate_features(&train, &test, config, split)?;
        log::info!("{name} split {split}: accuracy {:.4}", report.accuracy);
        reports.push(report);
    }
    Ok(ExperimentReport { name: name.to_string(), splits: reports })
}

/// The five network/selection combinations compared in the ablation:
/// translation order 1, translation order 2 (with and without selection),
/// roto-translation order 2 (with and without selection).
pub fn ablation_variants(base: &PipelineConfig) -> Vec<(String, PipelineConfig)> {
    let variant = |order: u8, roto: bool, ols: bool| {
        let mut c = base.clone();
        c.scattering.order = order;
        c.scattering.roto = roto;
        c.selection.ols = ols;
        c
    };
    vec![
        ("trans-order1".to_string(), variant(1, false, false)),
        ("trans-order2".to_string(), variant(2, false, false)),
        ("trans-order2-ols".to_string(), variant(2, false, true)),
        ("roto-order2".to_string(), variant(2, true, false)),
        ("roto-order2-ols".to_string(), variant(2, true, true)),
    ]
}

pub fn run_ablation(base: &PipelineConfig) -> Result<Vec<ExperimentReport>> {
    ablation_variants(base).into_iter().map(|(name, cfg)| run_experiment(&cfg, &name)).collect()
}

/// CSV table `configuration,mean_accuracy,split accuracies...`.
pub fn ablation_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("configuration,mean_accuracy,split_accuracies\n");
    for r in reports {
        let splits: Vec<String> = r.splits.iter().map(|s| format!("{:.6}", s.accuracy)).collect();
        out += &format!("{},{:.6},{}\n", r.name, r.mean_accuracy(), splits.join(";"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let mut c = PipelineConfig::default();
        c.scattering.max_scale = Some(2);
        c.selection.features = Some(123);
        c.run.cache_dir = Some(PathBuf::from("/tmp/x"));
        let text = c.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn merge_overrides_only_given_keys() {
        let mut c = PipelineConfig::default();
        c.svm.c = 4.0;
        c.run.seed = 9;
        let merged = c.merge_toml("[run]\nseed = 3\n[scattering]\nroto = false\n").unwrap();
        assert_eq!(merged.run.seed, 3);
        assert!(!merged.scattering.roto);
        assert_eq!(merged.svm.c, 4.0);
        assert!(c.merge_toml("[run]\nbogus = 1\n").is_err());
    }

    #[test]
    fn defaults_follow_image_side() {
        let s = ScatteringSection { log_side: 8, ..ScatteringSection::default() };
        let c = s.network_config();
        assert_eq!((c.max_scale, c.n_angles, c.angular_scales), (6, 8, 2));
        assert_eq!(default_feature_count(ScatteringConfig::for_side(5).output_dim(3)), 2000);
    }

    #[test]
    fn transform_keys_depend_on_network() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.scattering.roto = false;
        assert_ne!(a.transform_key(0), b.transform_key(0));
        assert_ne!(a.transform_key(0), a.transform_key(1));
        let mut c = a.clone();
        c.svm.c = 10.0;
        assert_eq!(a.transform_key(0), c.transform_key(0));
    }

    #[test]
    fn synthetic_pipeline_runs_end_to_end() {
        let mut c = PipelineConfig::default();
        c.dataset.kind = DatasetKind::Synthetic;
        c.dataset.train_per_class = Some(8);
        c.dataset.test_per_class = Some(4);
        c.scattering.log_side = 4;
        c.selection.per_class = Some(5);
        let report = run_experiment(&c, "synthetic").unwrap();
        assert_eq!(report.splits[0].n_train, 32);
        // Capped at 32 / (2 * 4) per class.
        assert_eq!(report.splits[0].reduced_dim, 16);
        assert!(report.mean_accuracy() > 0.5, "{}", report.to_key_values());
    }

    #[test]
    fn ablation_has_five_named_variants() {
        let v = ablation_variants(&PipelineConfig::default());
        assert_eq!(v.len(), 5);
        assert_eq!((v[0].1.scattering.order, v[0].1.scattering.roto, v[0].1.selection.ols), (1, false, false));
        assert_eq!((v[4].1.scattering.order, v[4].1.scattering.roto, v[4].1.selection.ols), (2, true, true));
    }
}
