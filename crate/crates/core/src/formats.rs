//! Versioned little-endian binary containers and CSV export.
//!
//! Every container starts with an 8-byte magic and a `u32` version. Integers
//! and floats are little-endian; floats are IEEE-754 `f64`.

use std::fs;
use std::io::Write;
use std::path::Path as FsPath;

use sha2::{Digest, Sha256};

use crate::classifier::KernelModel;
use crate::error::{Error, Result};
use crate::features::{ClassSelection, FeatureMatrix, SelectedBasis, SelectedFeature};
use crate::filterbank::{build_spatial_bank, MorletParams, SpatialFilterBank};
use crate::scattering::{AngularBand, Boundary, Path, ScatteringConfig};

pub const FORMAT_VERSION: u32 = 1;
pub const FEATURE_MAGIC: &[u8; 8] = b"RSCATFEA";
pub const BASIS_MAGIC: &[u8; 8] = b"RSCATOLS";
pub const MODEL_MAGIC: &[u8; 8] = b"RSCATSVM";
pub const BANK_MAGIC: &[u8; 8] = b"RSCATFBK";

#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn header(magic: &[u8; 8]) -> Self {
        let mut e = Self::default();
        e.buf.extend_from_slice(magic);
        e.u32(FORMAT_VERSION);
        e
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, v: &[f64]) {
        self.buf.reserve(8 * v.len());
        v.iter().for_each(|x| self.f64(*x));
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn open(buf: &'a [u8], magic: &[u8; 8]) -> Result<Self> {
        if buf.len() < 12 || &buf[..8] != magic {
            return Err(Error::Format(format!("missing {} header", String::from_utf8_lossy(magic))));
        }
        let mut d = Self { buf, pos: 8 };
        let version = d.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        Ok(d)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("size overflow".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("invalid UTF-8 string".into()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn write_atomic(path: &FsPath, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("partial");
    fs::File::create(&tmp)?.write_all(bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn encode_morlet(e: &mut Encoder, p: &MorletParams) {
    e.f64s(&[p.xi, p.sigma, p.slant, p.sigma_phi]);
}

fn decode_morlet(d: &mut Decoder) -> Result<MorletParams> {
    Ok(MorletParams { xi: d.f64()?, sigma: d.f64()?, slant: d.f64()?, sigma_phi: d.f64()? })
}

/// Column descriptor of a feature file: a path and a grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub path: Path,
    pub gy: u32,
    pub gx: u32,
}

impl Column {
    pub fn name(&self) -> String {
        let p = &self.path;
        format!("o{}_c{}_j{}_t{}_j{}_b{}_k{}_{}_y{}_x{}", p.order, p.channel, p.j1, p.theta, p.j2, p.beta, p.band.k(), band_tag(p.band), self.gy, self.gx)
    }
}

fn band_tag(band: AngularBand) -> &'static str {
    match band {
        AngularBand::None => "none",
        AngularBand::Lowpass => "low",
        AngularBand::Wavelet(_) => "wav",
    }
}

/// Expands paths into per-column descriptors (path-major, then grid rows).
pub fn columns_for(paths: &[Path], grid_side: usize) -> Vec<Column> {
    paths
        .iter()
        .flat_map(|&path| (0..grid_side * grid_side).map(move |i| Column { path, gy: (i / grid_side) as u32, gx: (i % grid_side) as u32 }))
        .collect()
}

/// Scattering features of a dataset with their column table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub config: ScatteringConfig,
    pub n_channels: usize,
    pub columns: Vec<Column>,
    pub matrix: FeatureMatrix,
    pub class_names: Vec<String>,
}

impl FeatureFile {
    /// Columns holding order-1 and order-2 coefficients.
    pub fn wavelet_mask(&self) -> Vec<bool> {
        self.columns.iter().map(|c| c.path.order >= 1).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let c = &self.config;
        let mut e = Encoder::header(FEATURE_MAGIC);
        e.u32(c.log_side);
        e.u32(c.max_scale);
        e.u32(c.n_angles as u32);
        e.u32(c.angular_scales);
        e.u32(self.n_channels as u32);
        e.u8(c.order);
        e.u8(u8::from(c.roto));
        e.u8(match c.boundary {
            Boundary::Periodic => 0,
            Boundary::Mirror => 1,
        });
        encode_morlet(&mut e, &c.morlet);
        e.u64(self.columns.len() as u64);
        for col in &self.columns {
            let p = &col.path;
            e.u8(p.order);
            e.u32(p.channel);
            e.u32(p.j1);
            e.u32(p.theta);
            e.u32(p.j2);
            e.u32(p.beta);
            e.u32(p.band.k());
            e.u8(p.band.kind());
            e.u32(col.gy);
            e.u32(col.gx);
        }
        e.u64(self.matrix.n_rows() as u64);
        e.f64s(self.matrix.values());
        e.u32(self.class_names.len() as u32);
        self.class_names.iter().for_each(|n| e.str(n));
        self.matrix.labels().iter().for_each(|&l| e.u32(l as u32));
        e.buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::open(bytes, FEATURE_MAGIC)?;
        let log_side = d.u32()?;
        let max_scale = d.u32()?;
        let n_angles = d.u32()? as usize;
        let angular_scales = d.u32()?;
        let n_channels = d.u32()? as usize;
        let order = d.u8()?;
        let roto = d.u8()? != 0;
        let boundary = match d.u8()? {
            0 => Boundary::Periodic,
            1 => Boundary::Mirror,
            b => return Err(Error::Format(format!("unknown boundary code {b}"))),
        };
        let morlet = decode_morlet(&mut d)?;
        let config = ScatteringConfig { log_side, max_scale, n_angles, angular_scales, order, roto, boundary, morlet };
        let n_cols = d.usize()?;
        let mut columns = Vec::with_capacity(n_cols.min(1 << 24));
        for _ in 0..n_cols {
            let order = d.u8()?;
            let channel = d.u32()?;
            let j1 = d.u32()?;
            let theta = d.u32()?;
            let j2 = d.u32()?;
            let beta = d.u32()?;
            let k = d.u32()?;
            let band = AngularBand::from_kind(d.u8()?, k).ok_or_else(|| Error::Format("bad angular band code".into()))?;
            let (gy, gx) = (d.u32()?, d.u32()?);
            columns.push(Column { path: Path { order, channel, j1, theta, j2, beta, band }, gy, gx });
        }
        let n_rows = d.usize()?;
        let values = d.f64s(n_rows.checked_mul(n_cols).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        let n_classes = d.u32()? as usize;
        let class_names = (0..n_classes).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
        let labels = (0..n_rows).map(|_| d.u32().map(|l| l as usize)).collect::<Result<Vec<_>>>()?;
        d.finish()?;
        let matrix = FeatureMatrix::new(n_rows, n_cols, values, labels, n_classes)?;
        Ok(Self { config, n_channels, columns, matrix, class_names })
    }

    pub fn write(&self, path: &FsPath) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn read(path: &FsPath) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    /// CSV with one header row of column names plus a trailing `label`.
    pub fn write_csv(&self, path: &FsPath) -> Result<()> {
        let csv_err = |e: csv::Error| Error::Io(e.into());
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header: Vec<String> = self.columns.iter().map(Column::name).collect();
        header.push("label".into());
        w.write_record(&header).map_err(csv_err)?;
        for (row, &label) in self.matrix.rows().zip(self.matrix.labels()) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            rec.push(label.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn encode_basis(basis: &SelectedBasis) -> Vec<u8> {
    let mut e = Encoder::header(BASIS_MAGIC);
    e.u64(basis.dim as u64);
    e.f64(basis.log_epsilon.unwrap_or(f64::NAN));
    e.u64(basis.features.len() as u64);
    for f in &basis.features {
        e.u32(f.class as u32);
        e.u32(f.rank as u32);
        e.u64(f.column as u64);
        e.f64(f.offset);
        e.u64(f.weights.len() as u64);
        for &(c, w) in &f.weights {
            e.u64(c as u64);
            e.f64(w);
        }
    }
    e.u32(basis.classes.len() as u32);
    for c in &basis.classes {
        e.u32(c.class as u32);
        e.u8(u8::from(c.truncated));
        e.u64(c.columns.len() as u64);
        c.columns.iter().for_each(|&p| e.u64(p as u64));
        e.f64s(&c.residuals);
    }
    e.buf
}

pub fn decode_basis(bytes: &[u8]) -> Result<SelectedBasis> {
    let mut d = Decoder::open(bytes, BASIS_MAGIC)?;
    let dim = d.usize()?;
    let log_epsilon = Some(d.f64()?).filter(|e| !e.is_nan());
    let m = d.usize()?;
    let mut features = Vec::with_capacity(m.min(1 << 20));
    for _ in 0..m {
        let class = d.u32()? as usize;
        let rank = d.u32()? as usize;
        let column = d.usize()?;
        let offset = d.f64()?;
        let nnz = d.usize()?;
        let weights = (0..nnz).map(|_| Ok((d.usize()?, d.f64()?))).collect::<Result<Vec<_>>>()?;
        if column >= dim || weights.iter().any(|&(c, _)| c >= dim) {
            return Err(Error::Format("basis column index out of range".into()));
        }
        features.push(SelectedFeature { class, rank, column, offset, weights });
    }
    let n_classes = d.u32()? as usize;
    let mut classes = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let class = d.u32()? as usize;
        let truncated = d.u8()? != 0;
        let n = d.usize()?;
        let columns = (0..n).map(|_| d.usize()).collect::<Result<Vec<_>>>()?;
        let residuals = d.f64s(n + 1)?;
        classes.push(ClassSelection { class, columns, residuals, truncated });
    }
    d.finish()?;
    Ok(SelectedBasis { dim, features, classes, training: None, log_epsilon })
}

pub fn write_basis(path: &FsPath, basis: &SelectedBasis) -> Result<()> {
    write_atomic(path, &encode_basis(basis))
}

pub fn read_basis(path: &FsPath) -> Result<SelectedBasis> {
    decode_basis(&fs::read(path)?)
}

pub fn encode_model(model: &KernelModel) -> Vec<u8> {
    let mut e = Encoder::header(MODEL_MAGIC);
    e.f64(model.sigma2);
    e.f64(model.c);
    e.u32(model.n_classes as u32);
    e.u64(model.dim as u64);
    e.u64(model.n_support() as u64);
    e.f64s(&model.support);
    e.f64s(&model.coef);
    e.f64s(&model.bias);
    e.buf
}

pub fn decode_model(bytes: &[u8]) -> Result<KernelModel> {
    let mut d = Decoder::open(bytes, MODEL_MAGIC)?;
    let sigma2 = d.f64()?;
    let c = d.f64()?;
    let n_classes = d.u32()? as usize;
    let dim = d.usize()?;
    let n_sv = d.usize()?;
    let support = d.f64s(n_sv * dim)?;
    let coef = d.f64s(n_sv * n_classes)?;
    let bias = d.f64s(n_classes)?;
    d.finish()?;
    Ok(KernelModel { sigma2, c, n_classes, dim, support, coef, bias, diagnostics: Vec::new() })
}

pub fn write_model(path: &FsPath, model: &KernelModel) -> Result<()> {
    write_atomic(path, &encode_model(model))
}

pub fn read_model(path: &FsPath) -> Result<KernelModel> {
    decode_model(&fs::read(path)?)
}

/// Filter-bank cache file. Coefficients are stored complex (real and
/// imaginary parts interleaved) even though the Morlet spectra are real.
pub fn encode_bank(bank: &SpatialFilterBank, angular_scales: u32) -> Vec<u8> {
    let mut e = Encoder::header(BANK_MAGIC);
    e.u32(bank.log_side());
    e.u32(bank.max_scale());
    e.u32(bank.n_angles() as u32);
    e.u32(angular_scales);
    encode_morlet(&mut e, bank.params());
    e.f64s(bank.gains());
    let complex = |e: &mut Encoder, f: &[f64]| f.iter().for_each(|&v| e.f64s(&[v, 0.0]));
    for j in 1..=bank.max_scale() {
        for l in 0..bank.n_angles() {
            complex(&mut e, bank.psi(j, l));
        }
    }
    for j in 1..=bank.max_scale() {
        complex(&mut e, bank.phi(j));
    }
    e.buf
}

pub fn decode_bank(bytes: &[u8]) -> Result<(SpatialFilterBank, u32)> {
    let mut d = Decoder::open(bytes, BANK_MAGIC)?;
    let log_side = d.u32()?;
    let max_scale = d.u32()?;
    let n_angles = d.u32()? as usize;
    let angular_scales = d.u32()?;
    if log_side > 16 || max_scale > log_side {
        return Err(Error::Format("bank header out of range".into()));
    }
    let params = decode_morlet(&mut d)?;
    let gains = d.f64s(max_scale as usize)?;
    let n2 = 1usize << (2 * log_side);
    let real = |d: &mut Decoder| -> Result<Vec<f64>> { Ok(d.f64s(2 * n2)?.chunks_exact(2).map(|c| c[0]).collect()) };
    let psi = (0..max_scale as usize * n_angles).map(|_| real(&mut d)).collect::<Result<Vec<_>>>()?;
    let phi = (0..max_scale).map(|_| real(&mut d)).collect::<Result<Vec<_>>>()?;
    d.finish()?;
    Ok((SpatialFilterBank::from_parts(log_side, max_scale, n_angles, params, gains, psi, phi)?, angular_scales))
}

/// Hex SHA-256 of a cache key string.
pub fn cache_key(parts: &str) -> String {
    hex::encode(Sha256::digest(parts.as_bytes()))
}

/// Reads the bank from `dir` when a matching cache file exists, otherwise
/// builds and stores it.
pub fn cached_spatial_bank(dir: &FsPath, d: u32, j: u32, l: usize, k: u32, params: MorletParams) -> Result<SpatialFilterBank> {
    let key = cache_key(&format!("bank|v{FORMAT_VERSION}|{d}|{j}|{l}|{k}|{:?}", params));
    let path = dir.join(format!("bank-{}.bin", &key[..16]));
    if let Ok(bytes) = fs::read(&path) {
        match decode_bank(&bytes) {
            Ok((bank, cached_k))
                if bank.log_side() == d && bank.max_scale() == j && bank.n_angles() == l && cached_k == k && *bank.params() == params =>
            {
                return Ok(bank);
            }
            _ => log::warn!("ignoring stale filter bank cache {}", path.display()),
        }
    }
    let bank = build_spatial_bank(d, j, l, params)?;
    write_atomic(&path, &encode_bank(&bank, k))?;
    Ok(bank)
}
