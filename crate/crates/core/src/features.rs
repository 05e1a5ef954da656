//! Patch feature sets, the `H2RF` interchange format, and slide-level mean
//! aggregation.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "H2RF" | u32 version=1 | u32 len, patient_id (UTF-8) | u32 len, extractor_tag (UTF-8)
//!        | u32 N | u32 F | N·F f32 row-major
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::expression::ExpressionMatrix;

pub const MAGIC: &[u8; 4] = b"H2RF";
pub const VERSION: u32 = 1;
pub const EXTENSION: &str = "h2rf";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("feature set has no patches")]
    EmptyFeatureSet,
    #[error("no patient appears in both features and expression")]
    EmptyIntersection,
    #[error("duplicate patient id {0}")]
    DuplicatePatient(String),
    #[error("invalid UTF-8 in {0}")]
    InvalidUtf8(&'static str),
    #[error("parse error on line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

/// N patch feature vectors of width F for one patient, stored as in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatureSet {
    pub patient_id: String,
    pub extractor_tag: String,
    n_patches: usize,
    n_features: usize,
    values: Vec<f32>,
}

impl PatchFeatureSet {
    pub fn new(
        patient_id: impl Into<String>,
        extractor_tag: impl Into<String>,
        n_patches: usize,
        n_features: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        if n_patches == 0 {
            return Err(FeatureError::EmptyFeatureSet);
        }
        if n_features == 0 || values.len() != n_patches * n_features {
            return Err(FeatureError::ShapeMismatch(format!(
                "{} values for {n_patches}×{n_features}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFiniteValue { row: i / n_features, col: i % n_features });
        }
        Ok(Self { patient_id: patient_id.into(), extractor_tag: extractor_tag.into(), n_patches, n_features, values })
    }

    /// Builds a set from f64 rows, rounding to f32.
    pub fn from_rows(patient_id: impl Into<String>, extractor_tag: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let f = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != f) {
            return Err(FeatureError::ShapeMismatch(format!("row {r} has width {}, expected {f}", rows[r].len())));
        }
        let values = rows.iter().flatten().map(|&v| v as f32).collect();
        Self::new(patient_id, extractor_tag, rows.len(), f, values)
    }

    pub fn n_patches(&self) -> usize {
        self.n_patches
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.n_features)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_str(&mut w, &self.patient_id)?;
        write_str(&mut w, &self.extractor_tag)?;
        w.write_all(&u32_of(self.n_patches)?.to_le_bytes())?;
        w.write_all(&u32_of(self.n_features)?.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(FeatureError::BadMagic(magic));
        }
        let version = read_u32(&mut r, "version")?;
        if version != VERSION {
            return Err(FeatureError::UnsupportedVersion(version));
        }
        let patient_id = read_str(&mut r, "patient_id")?;
        let extractor_tag = read_str(&mut r, "extractor_tag")?;
        let n = read_u32(&mut r, "N")? as usize;
        let f = read_u32(&mut r, "F")? as usize;
        let count = n.checked_mul(f).ok_or_else(|| FeatureError::ShapeMismatch(format!("{n}×{f} overflows")))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != count * 4 {
            return Err(FeatureError::ShapeMismatch(format!(
                "header declares {n}×{f} values ({} bytes), payload has {} bytes",
                count * 4,
                bytes.len()
            )));
        }
        let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Self::new(patient_id, extractor_tag, n, f, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| FeatureError::ShapeMismatch(format!("{n} exceeds u32")))
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&u32_of(s.len())?.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => FeatureError::ShapeMismatch(format!("file truncated in {what}")),
        _ => FeatureError::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R, what: &'static str) -> Result<String> {
    let len = read_u32(r, what)? as usize;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(FeatureError::ShapeMismatch(format!("file truncated in {what}")));
    }
    String::from_utf8(buf).map_err(|_| FeatureError::InvalidUtf8(what))
}

/// Aggregated slide-level feature `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlideFeature {
    pub patient_id: String,
    pub z: Vec<f64>,
}

/// Column means of an `n × f` row-major matrix, accumulated in f64 from the
/// first row to the last.
pub fn mean_rows<T: Copy + Into<f64>>(values: &[T], n: usize, f: usize) -> Vec<f64> {
    debug_assert_eq!(values.len(), n * f);
    let mut acc = vec![0.0f64; f];
    for row in values.chunks_exact(f) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v.into();
        }
    }
    let n = n as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// `z = (1/N) Σ x_i`.
pub fn aggregate(p: &PatchFeatureSet) -> SlideFeature {
    SlideFeature {
        patient_id: p.patient_id.clone(),
        z: mean_rows(&p.values, p.n_patches, p.n_features),
    }
}

/// Rows of slide features joined with expression targets, sorted by patient id.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub patient_ids: Vec<String>,
    pub genes: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Patients with features but no expression.
    pub dropped_features: Vec<String>,
    /// Patients with expression but no features.
    pub dropped_expression: Vec<String>,
}

impl AlignedDataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Rows at `idx`, in that order. Drop reports are not carried over.
    pub fn subset(&self, idx: &[usize]) -> AlignedDataset {
        AlignedDataset {
            patient_ids: idx.iter().map(|&i| self.patient_ids[i].clone()).collect(),
            genes: self.genes.clone(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i].clone()).collect(),
            dropped_features: vec![],
            dropped_expression: vec![],
        }
    }
}

/// Inner join of slide features and expression rows on patient id.
pub fn assemble_dataset(features: &[SlideFeature], expr: &ExpressionMatrix) -> Result<AlignedDataset> {
    let mut by_id: BTreeMap<&str, &SlideFeature> = BTreeMap::new();
    for f in features {
        if by_id.insert(f.patient_id.as_str(), f).is_some() {
            return Err(FeatureError::DuplicatePatient(f.patient_id.clone()));
        }
    }
    if let Some(first) = features.first() {
        if let Some(bad) = features.iter().find(|f| f.z.len() != first.z.len()) {
            return Err(FeatureError::ShapeMismatch(format!(
                "patient {} has width {}, expected {}",
                bad.patient_id,
                bad.z.len(),
                first.z.len()
            )));
        }
    }
    let mut rows: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, id) in expr.patient_ids.iter().enumerate() {
        rows.insert(id.as_str(), i);
    }

    let mut out = AlignedDataset {
        patient_ids: vec![],
        genes: expr.genes.clone(),
        x: vec![],
        y: vec![],
        dropped_features: vec![],
        dropped_expression: vec![],
    };
    for (id, f) in &by_id {
        match rows.get(id) {
            Some(&r) => {
                out.patient_ids.push(id.to_string());
                out.x.push(f.z.clone());
                out.y.push(expr.values[r].clone());
            }
            None => out.dropped_features.push(id.to_string()),
        }
    }
    out.dropped_expression = rows
        .keys()
        .filter(|id| !by_id.contains_key(*id))
        .map(|id| id.to_string())
        .collect();
    if out.x.is_empty() {
        return Err(FeatureError::EmptyIntersection);
    }
    Ok(out)
}

/// CSV `patient_id,z0,z1,...` with shortest round-trip float formatting.
pub fn write_slide_features<W: Write>(features: &[SlideFeature], mut w: W) -> Result<()> {
    let f = features.first().map_or(0, |s| s.z.len());
    let mut header = String::from("patient_id");
    for i in 0..f {
        header.push_str(&format!(",z{i}"));
    }
    writeln!(w, "{header}")?;
    for s in features {
        let mut line = s.patient_id.clone();
        for v in &s.z {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_slide_features<R: Read>(r: R) -> Result<Vec<SlideFeature>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| FeatureError::ParseError { line, message: e.to_string() })?;
        let patient_id = rec.get(0).unwrap_or("").to_string();
        let z = rec
            .iter()
            .skip(1)
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| FeatureError::ParseError { line, message: e.to_string() })?;
        out.push(SlideFeature { patient_id, z });
    }
    Ok(out)
}

/// `.h2rf` files in `dir`, sorted by file name.
pub fn feature_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == EXTENSION))
        .collect();
    files.sort();
    Ok(files)
}
