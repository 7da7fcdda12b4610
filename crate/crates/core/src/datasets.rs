//! Dataset ingestion: CIFAR binary batches, class-per-directory image
//! corpora, square rescaling, YUV conversion and seeded splits.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_PIXELS: usize = CIFAR_SIDE * CIFAR_SIDE * 3;

/// Directory names skipped by default when loading image corpora.
pub const DEFAULT_EXCLUDED_CLASSES: &[&str] = &["BACKGROUND_Google", "257.clutter"];

/// Images with dense class ids in `0..class_names.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// Where each image came from (file path, with `#record` for batches).
    pub sources: Vec<String>,
    /// Seed of the split that produced this dataset, if any.
    pub split_seed: Option<u64>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Keeps the listed samples, in order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            sources: indices.iter().map(|&i| self.sources[i].clone()).collect(),
            split_seed: self.split_seed,
        }
    }

    pub fn map_images(self, f: impl Fn(&Image) -> Result<Image> + Sync + Send) -> Result<Self> {
        let images = self.images.par_iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(Self { images, ..self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarVariant {
    Ten,
    Hundred,
}

impl CifarVariant {
    pub fn label_bytes(self) -> usize {
        match self {
            CifarVariant::Ten => 1,
            CifarVariant::Hundred => 2,
        }
    }

    pub fn record_len(self) -> usize {
        self.label_bytes() + CIFAR_PIXELS
    }

    pub fn n_classes(self) -> usize {
        match self {
            CifarVariant::Ten => 10,
            CifarVariant::Hundred => 100,
        }
    }

    fn batch_files(self, split: CifarSplit) -> Vec<&'static str> {
        match (self, split) {
            (CifarVariant::Ten, CifarSplit::Train) => {
                vec!["data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"]
            }
            (CifarVariant::Ten, CifarSplit::Test) => vec!["test_batch.bin"],
            (CifarVariant::Hundred, CifarSplit::Train) => vec!["train.bin"],
            (CifarVariant::Hundred, CifarSplit::Test) => vec!["test.bin"],
        }
    }

    fn label_names_file(self) -> &'static str {
        match self {
            CifarVariant::Ten => "batches.meta.txt",
            CifarVariant::Hundred => "fine_label_names.txt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarSplit {
    Train,
    Test,
}

impl CifarSplit {
    pub fn expected_len(self) -> usize {
        match self {
            CifarSplit::Train => 50_000,
            CifarSplit::Test => 10_000,
        }
    }
}

/// One raw CIFAR record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CifarRecord {
    /// Coarse label (CIFAR-100 only).
    pub coarse: Option<u8>,
    /// Class label (fine label for CIFAR-100).
    pub label: u8,
    /// 1024 red, 1024 green, 1024 blue bytes, each plane row-major.
    pub pixels: Vec<u8>,
}

impl CifarRecord {
    pub fn to_image(&self) -> Image {
        let planes = self.pixels.chunks(CIFAR_SIDE * CIFAR_SIDE).map(|p| p.iter().map(|&b| f64::from(b) / 255.0).collect()).collect();
        Image::new(CIFAR_SIDE, planes).expect("CIFAR records are 32x32x3")
    }
}

/// Parses every record of one batch file.
pub fn read_cifar_records(path: &Path, variant: CifarVariant) -> Result<Vec<CifarRecord>> {
    let bytes = fs::read(path)?;
    let record = variant.record_len();
    if bytes.is_empty() {
        return Err(Error::MalformedRecord { path: path.to_path_buf(), reason: "empty file".into() });
    }
    if bytes.len() % record != 0 {
        return Err(Error::TruncatedFile { path: path.to_path_buf(), len: bytes.len(), record });
    }
    bytes
        .chunks_exact(record)
        .enumerate()
        .map(|(i, r)| {
            let (coarse, label) = match variant {
                CifarVariant::Ten => (None, r[0]),
                CifarVariant::Hundred => (Some(r[0]), r[1]),
            };
            if usize::from(label) >= variant.n_classes() || coarse.is_some_and(|c| c >= 20) {
                return Err(Error::MalformedRecord {
                    path: path.to_path_buf(),
                    reason: format!("record {i} has label {label} outside 0..{}", variant.n_classes()),
                });
            }
            Ok(CifarRecord { coarse, label, pixels: r[variant.label_bytes()..].to_vec() })
        })
        .collect()
}

/// Serializes records in the binary batch layout.
pub fn encode_cifar_records(records: &[CifarRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.len() * (2 + CIFAR_PIXELS));
    for r in records {
        if let Some(c) = r.coarse {
            out.push(c);
        }
        out.push(r.label);
        out.extend_from_slice(&r.pixels);
    }
    out
}

pub fn write_cifar_records(path: &Path, records: &[CifarRecord]) -> Result<()> {
    fs::write(path, encode_cifar_records(records))?;
    Ok(())
}

/// Builds a record from an RGB image in `[0, 1]`.
pub fn cifar_record_from_image(image: &Image, label: u8, coarse: Option<u8>) -> Result<CifarRecord> {
    if image.side() != CIFAR_SIDE || image.n_channels() != 3 {
        return Err(Error::DimensionMismatch { expected: "32x32 RGB image".into(), found: format!("{0}x{0}x{1}", image.side(), image.n_channels()) });
    }
    let pixels = image.planes().iter().flatten().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect();
    Ok(CifarRecord { coarse, label, pixels })
}

fn cifar_class_names(dir: &Path, variant: CifarVariant) -> Vec<String> {
    let names: Vec<String> = fs::read_to_string(dir.join(variant.label_names_file()))
        .map(|s| s.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
        .unwrap_or_default();
    if names.len() == variant.n_classes() {
        names
    } else {
        (0..variant.n_classes()).map(|c| c.to_string()).collect()
    }
}

/// Loads one batch file.
pub fn load_cifar_file(path: &Path, variant: CifarVariant) -> Result<LabeledDataset> {
    let records = read_cifar_records(path, variant)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    Ok(LabeledDataset {
        images: records.par_iter().map(CifarRecord::to_image).collect(),
        labels: records.iter().map(|r| usize::from(r.label)).collect(),
        class_names: cifar_class_names(dir, variant),
        sources: (0..records.len()).map(|i| format!("{}#{i}", path.display())).collect(),
        split_seed: None,
    })
}

/// Loads the canonical train or test split from a CIFAR binary directory
/// and checks its size.
pub fn load_cifar(dir: &Path, variant: CifarVariant, split: CifarSplit) -> Result<LabeledDataset> {
    let mut all: Option<LabeledDataset> = None;
    for name in variant.batch_files(split) {
        let part = load_cifar_file(&dir.join(name), variant)?;
        match &mut all {
            None => all = Some(part),
            Some(ds) => {
                ds.images.extend(part.images);
                ds.labels.extend(part.labels);
                ds.sources.extend(part.sources);
            }
        }
    }
    let ds = all.expect("every split has at least one batch");
    if ds.len() != split.expected_len() {
        return Err(Error::MalformedRecord {
            path: dir.to_path_buf(),
            reason: format!("expected {} records, found {}", split.expected_len(), ds.len()),
        });
    }
    Ok(ds)
}

/// A decoded raster of arbitrary size, channel-planar, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub planes: Vec<Vec<f64>>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        if planes.is_empty() || planes.iter().any(|p| p.len() != width * height) {
            return Err(Error::DimensionMismatch {
                expected: format!("non-empty planes of {width}x{height}"),
                found: format!("{:?}", planes.iter().map(Vec::len).collect::<Vec<_>>()),
            });
        }
        Ok(Self { width, height, planes })
    }

    pub fn from_image(image: &Image) -> Self {
        Self { width: image.side(), height: image.side(), planes: image.planes().to_vec() }
    }

    fn from_rgb8(img: &::image::RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut planes = vec![Vec::with_capacity(w * h); 3];
        for px in img.pixels() {
            for (p, &v) in planes.iter_mut().zip(&px.0) {
                p.push(f64::from(v) / 255.0);
            }
        }
        Self { width: w, height: h, planes }
    }
}

/// How non-square inputs reach the square grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AspectMode {
    /// Resample each axis independently.
    #[default]
    Stretch,
    /// Take the centered square of side `min(width, height)` first.
    Crop,
}

/// Source coordinate of output sample `i` for half-pixel-centered resampling.
fn source_coordinate(i: usize, out: usize, input: usize) -> (usize, usize, f64) {
    let x = ((i as f64 + 0.5) * input as f64 / out as f64 - 0.5).clamp(0.0, (input - 1) as f64);
    let x0 = x.floor() as usize;
    let x1 = (x0 + 1).min(input - 1);
    (x0, x1, x - x0 as f64)
}

fn bilinear(plane: &[f64], width: usize, height: usize, left: usize, top: usize, w: usize, h: usize, side: usize) -> Vec<f64> {
    let cols: Vec<_> = (0..side).map(|c| source_coordinate(c, side, w)).collect();
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        let (y0, y1, fy) = source_coordinate(r, side, h);
        let row0 = &plane[(top + y0) * width..];
        let row1 = &plane[(top + y1) * width..];
        for &(x0, x1, fx) in &cols {
            let a = row0[left + x0] * (1.0 - fx) + row0[left + x1] * fx;
            let b = row1[left + x0] * (1.0 - fx) + row1[left + x1] * fx;
            out.push(a * (1.0 - fy) + b * fy);
        }
    }
    debug_assert!(height >= top + h);
    out
}

/// Bilinear resampling onto a `2^d x 2^d` grid. Inputs already of that size
/// are returned unchanged.
pub fn rescale_square(x: &RasterImage, log_side: u32, mode: AspectMode) -> Result<Image> {
    if log_side < 3 || log_side > 16 {
        return Err(Error::InvalidDims(format!("target side 2^{log_side} outside 2^3..2^16")));
    }
    if x.width == 0 || x.height == 0 {
        return Err(Error::EmptyInput("zero-size image"));
    }
    let side = 1usize << log_side;
    if x.width == side && x.height == side {
        return Image::new(side, x.planes.clone());
    }
    let (left, top, w, h) = match mode {
        AspectMode::Stretch => (0, 0, x.width, x.height),
        AspectMode::Crop => {
            let s = x.width.min(x.height);
            ((x.width - s) / 2, (x.height - s) / 2, s, s)
        }
    };
    let planes = x.planes.iter().map(|p| bilinear(p, x.width, x.height, left, top, w, h, side)).collect();
    Image::new(side, planes)
}

pub const YUV_U_SCALE: f64 = 0.492111;
pub const YUV_V_SCALE: f64 = 0.877283;
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// BT.601 analog YUV: `Y = .299 R + .587 G + .114 B`,
/// `U = 0.492111 (B - Y)`, `V = 0.877283 (R - Y)`.
pub fn rgb_to_yuv(x: &Image) -> Result<Image> {
    if x.n_channels() != 3 {
        return Err(Error::ChannelCount { expected: 3, found: x.n_channels() });
    }
    let (r, g, b) = (x.channel(0), x.channel(1), x.channel(2));
    let n = r.len();
    let mut planes = vec![Vec::with_capacity(n); 3];
    for i in 0..n {
        let y = LUMA[0] * r[i] + LUMA[1] * g[i] + LUMA[2] * b[i];
        planes[0].push(y);
        planes[1].push(YUV_U_SCALE * (b[i] - y));
        planes[2].push(YUV_V_SCALE * (r[i] - y));
    }
    Image::new(x.side(), planes)
}

pub fn yuv_to_rgb(x: &Image) -> Result<Image> {
    if x.n_channels() != 3 {
        return Err(Error::ChannelCount { expected: 3, found: x.n_channels() });
    }
    let (yp, up, vp) = (x.channel(0), x.channel(1), x.channel(2));
    let n = yp.len();
    let mut planes = vec![Vec::with_capacity(n); 3];
    for i in 0..n {
        let b = yp[i] + up[i] / YUV_U_SCALE;
        let r = yp[i] + vp[i] / YUV_V_SCALE;
        let g = (yp[i] - LUMA[0] * r - LUMA[2] * b) / LUMA[1];
        planes[0].push(r);
        planes[1].push(g);
        planes[2].push(b);
    }
    Image::new(x.side(), planes)
}

/// Options of [`load_image_dir`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDirOptions {
    pub log_side: u32,
    pub aspect: AspectMode,
    pub exclude: Vec<String>,
}

impl Default for ImageDirOptions {
    fn default() -> Self {
        Self { log_side: 8, aspect: AspectMode::Stretch, exclude: DEFAULT_EXCLUDED_CLASSES.iter().map(|s| s.to_string()).collect() }
    }
}

/// Result of [`load_image_dir`]: the dataset plus the files that could not
/// be decoded.
#[derive(Debug, Clone)]
pub struct ImageDirLoad {
    pub dataset: LabeledDataset,
    pub skipped: Vec<PathBuf>,
}

/// Loads a class-per-directory corpus, sorted by class and file name. Every
/// image is decoded as RGB and rescaled to the configured square.
pub fn load_image_dir(root: &Path, options: &ImageDirOptions) -> Result<ImageDirLoad> {
    let mut classes: Vec<(String, PathBuf)> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), e.path()))
        .filter(|(name, _)| !options.exclude.iter().any(|x| x == name))
        .collect();
    classes.sort();
    if classes.is_empty() {
        return Err(Error::EmptyInput("no class directories"));
    }
    let mut dataset = LabeledDataset {
        images: Vec::new(),
        labels: Vec::new(),
        class_names: Vec::new(),
        sources: Vec::new(),
        split_seed: None,
    };
    let mut skipped = Vec::new();
    for (label, (name, dir)) in classes.into_iter().enumerate() {
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_file()).collect();
        files.sort();
        let decoded: Vec<(PathBuf, Option<Image>)> = files
            .into_par_iter()
            .map(|p| {
                let img = ::image::open(&p)
                    .ok()
                    .and_then(|d| rescale_square(&RasterImage::from_rgb8(&d.to_rgb8()), options.log_side, options.aspect).ok());
                (p, img)
            })
            .collect();
        let before = dataset.len();
        for (p, img) in decoded {
            match img {
                Some(img) => {
                    dataset.images.push(img);
                    dataset.labels.push(label);
                    dataset.sources.push(p.display().to_string());
                }
                None => {
                    log::warn!("skipping unreadable image {}", p.display());
                    skipped.push(p);
                }
            }
        }
        if dataset.len() == before {
            return Err(Error::EmptyClass(name));
        }
        dataset.class_names.push(name);
    }
    Ok(ImageDirLoad { dataset, skipped })
}

fn shuffled_by_class(ds: &LabeledDataset, seed: u64) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); ds.n_classes()];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for members in &mut by_class {
        members.shuffle(&mut rng);
    }
    by_class
}

/// Random per-class split: `n_train_per_class` training images per class,
/// the rest for testing. Each part keeps the original sample order.
pub fn split_train_test(ds: &LabeledDataset, n_train_per_class: usize, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let by_class = shuffled_by_class(ds, seed);
    for (class, members) in by_class.iter().enumerate() {
        if members.len() <= n_train_per_class {
            return Err(Error::InsufficientClassSize { class, have: members.len(), need: n_train_per_class });
        }
    }
    let mut train: Vec<usize> = by_class.iter().flat_map(|m| m[..n_train_per_class].iter().copied()).collect();
    let mut test: Vec<usize> = by_class.iter().flat_map(|m| m[n_train_per_class..].iter().copied()).collect();
    train.sort_unstable();
    test.sort_unstable();
    let mut a = ds.subset(&train);
    let mut b = ds.subset(&test);
    a.split_seed = Some(seed);
    b.split_seed = Some(seed);
    Ok((a, b))
}

/// Seeded random subset with exactly `n_per_class` samples of every class.
pub fn sample_per_class(ds: &LabeledDataset, n_per_class: usize, seed: u64) -> Result<LabeledDataset> {
    let by_class = shuffled_by_class(ds, seed);
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < n_per_class {
            return Err(Error::InsufficientClassSize { class, have: members.len(), need: n_per_class.saturating_sub(1) });
        }
    }
    let mut keep: Vec<usize> = by_class.iter().flat_map(|m| m[..n_per_class].iter().copied()).collect();
    keep.sort_unstable();
    let mut out = ds.subset(&keep);
    out.split_seed = Some(seed);
    Ok(out)
}

/// Seeded RGB textures: class `c` is a grating at angle `c * pi / n_classes`
/// with random phase, frequency jitter and additive uniform noise.
pub fn synthetic_textures(n_classes: usize, per_class: usize, log_side: u32, seed: u64) -> LabeledDataset {
    let n = 1usize << log_side;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n_classes * per_class);
    let mut labels = Vec::with_capacity(n_classes * per_class);
    let mut sources = Vec::with_capacity(n_classes * per_class);
    for i in 0..n_classes * per_class {
        let class = i % n_classes;
        let angle = class as f64 * std::f64::consts::PI / n_classes as f64;
        let freq = std::f64::consts::PI / 4.0 * (0.8 + 0.4 * rng.random::<f64>());
        let phase = std::f64::consts::TAU * rng.random::<f64>();
        let (s, c) = angle.sin_cos();
        let tint: [f64; 3] = [0.6 + 0.4 * rng.random::<f64>(), 0.6 + 0.4 * rng.random::<f64>(), 0.6 + 0.4 * rng.random::<f64>()];
        let mut planes = vec![vec![0.0; n * n]; 3];
        for y in 0..n {
            for x in 0..n {
                let wave = 0.5 + 0.35 * (freq * (c * x as f64 + s * y as f64) + phase).cos();
                for (plane, t) in planes.iter_mut().zip(tint) {
                    plane[y * n + x] = (t * wave + 0.15 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
                }
            }
        }
        images.push(Image::new(n, planes).expect("square power-of-two image"));
        labels.push(class);
        sources.push(format!("synthetic#{i}"));
    }
    LabeledDataset {
        images,
        labels,
        class_names: (0..n_classes).map(|c| format!("texture{c}")).collect(),
        sources,
        split_seed: None,
    }
}

/// Writes `path,class,split` rows for the given datasets.
pub fn write_manifest(path: &Path, parts: &[(&str, &LabeledDataset)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    w.write_record(["path", "class", "split"]).map_err(|e| Error::Io(e.into()))?;
    for (split, ds) in parts {
        for (src, &l) in ds.sources.iter().zip(&ds.labels) {
            w.write_record([src.as_str(), ds.class_names[l].as_str(), split]).map_err(|e| Error::Io(e.into()))?;
        }
    }
    w.flush()?;
    Ok(())
}
