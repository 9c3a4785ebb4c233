//! Core data types and the on-disk dataset format.
//!
//! A dataset is a JSON manifest next to raw little-endian blobs:
//!
//! ```json
//! { "n": 4, "d": 2, "c": 2, "dtype": "f32le",
//!   "embeddings": "embeddings.bin", "labels": "labels.bin", "prototypes": "prototypes.bin" }
//! ```
//!
//! `embeddings` is N×D row-major `f32`, `labels` is N `u32`, `prototypes` is C×D row-major `f32`.
//! Optional keys: `templates` (C×J×D `f32`, requires `j`), `unlabeled` (M×D `f32`, requires `m`)
//! and `tau`. Values are widened to `f64` on load and narrowed back on save.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows whose norm is below this cannot be normalized and are rejected.
pub const MIN_ROW_NORM: f64 = 1e-8;
/// Tolerance on stored row norms.
pub const NORM_TOLERANCE: f64 = 1e-4;
/// Rows already within this distance of unit norm are kept as stored, so that
/// `f32` data survives a load/save cycle bit-exactly.
pub const RENORM_SKIP: f64 = 1e-6;
/// Pre-normalization deviation that is surfaced as a load warning.
pub const NORM_WARNING: f64 = 0.1;

pub const DTYPE_F32LE: &str = "f32le";

/// Row-major matrix of unit-norm embeddings, computed in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix(Array2<f64>);

impl EmbeddingMatrix {
    /// Normalizes every row to unit norm. Zero rows and non-finite entries are errors.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        Self::normalized(values).map(|(m, _)| m)
    }

    /// Like [`EmbeddingMatrix::new`] but also returns the largest norm deviation
    /// observed before normalization and the offending row indices above
    /// [`NORM_WARNING`].
    pub fn normalized(mut values: Array2<f64>) -> Result<(Self, NormalizationReport)> {
        if values.ncols() == 0 {
            return Err(Error::Data("embedding dimension must be at least 1".into()));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite embedding value at row {}",
                pos / values.ncols()
            )));
        }
        let mut report = NormalizationReport::default();
        for (i, mut row) in values.axis_iter_mut(Axis(0)).enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm < MIN_ROW_NORM {
                return Err(Error::Data(format!(
                    "embedding row {i} has norm {norm:e}; cannot normalize"
                )));
            }
            let deviation = (norm - 1.0).abs();
            report.max_deviation = report.max_deviation.max(deviation);
            if deviation > NORM_WARNING {
                report.warned_rows.push(i);
            }
            if deviation > RENORM_SKIP {
                row.mapv_inplace(|x| x / norm);
            }
        }
        Ok((Self(values), report))
    }

    pub fn empty(dim: usize) -> Self {
        Self(Array2::zeros((0, dim)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    /// Copies the selected rows into a new matrix.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self(self.0.select(Axis(0), indices))
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalizationReport {
    pub max_deviation: f64,
    pub warned_rows: Vec<usize>,
}

/// Labeled support set. Labels are stored as class indices; [`SupportSet::one_hot`]
/// gives the N×C one-hot matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    embeddings: EmbeddingMatrix,
    labels: Vec<usize>,
    class_count: usize,
}

impl SupportSet {
    pub fn new(embeddings: EmbeddingMatrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if embeddings.rows() == 0 {
            return Err(Error::Empty("support set has no samples".into()));
        }
        check_labels(&labels, embeddings.rows(), class_count)?;
        Ok(Self {
            embeddings,
            labels,
            class_count,
        })
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    /// Per-class counts K_c.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    pub fn one_hot(&self) -> Array2<f64> {
        one_hot(&self.labels, self.class_count)
    }
}

/// Unlabeled embeddings. May be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledSet {
    embeddings: EmbeddingMatrix,
}

impl UnlabeledSet {
    pub fn new(embeddings: EmbeddingMatrix) -> Self {
        Self { embeddings }
    }

    pub fn empty(dim: usize) -> Self {
        Self::new(EmbeddingMatrix::empty(dim))
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// C×D class weights. Rows are not required to be unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMatrix(Array2<f64>);

impl PrototypeMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Data(format!(
                "prototype matrix must be non-empty, got {:?}",
                values.dim()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite prototype entry".into()));
        }
        Ok(Self(values))
    }

    pub fn class_count(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn row(&self, c: usize) -> ArrayView1<'_, f64> {
        self.0.row(c)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// A distribution over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMarginal(Array1<f64>);

impl LabelMarginal {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(probs: Array1<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("label marginal has no classes".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Data(format!("invalid marginal entries: {probs}")));
        }
        let sum = probs.sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Data(format!("marginal sums to {sum}, expected 1")));
        }
        Ok(Self(probs))
    }

    /// Normalizes nonnegative weights to sum 1.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || sum.is_nan() || sum <= 0.0 {
            return Err(Error::Data(format!("invalid marginal weights {weights:?}")));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; classes])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }
}

/// Labeled pool used for sampling and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    embeddings: EmbeddingMatrix,
    labels: Vec<usize>,
    class_count: usize,
}

impl EvalSet {
    pub fn new(embeddings: EmbeddingMatrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        check_labels(&labels, embeddings.rows(), class_count)?;
        Ok(Self {
            embeddings,
            labels,
            class_count,
        })
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            embeddings: self.embeddings.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    /// Empirical class frequencies of the pool.
    pub fn marginal(&self) -> Result<LabelMarginal> {
        let mut counts = vec![0.0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1.0;
        }
        LabelMarginal::from_weights(&counts)
    }
}

fn check_labels(labels: &[usize], rows: usize, class_count: usize) -> Result<()> {
    if class_count == 0 {
        return Err(Error::Data("class count must be at least 1".into()));
    }
    if labels.len() != rows {
        return Err(Error::Shape(format!(
            "{} labels for {rows} embeddings",
            labels.len()
        )));
    }
    if let Some((i, y)) = labels.iter().enumerate().find(|(_, &y)| y >= class_count) {
        return Err(Error::Data(format!(
            "label {y} at index {i} out of range for {class_count} classes"
        )));
    }
    Ok(())
}

pub fn one_hot(labels: &[usize], class_count: usize) -> Array2<f64> {
    let mut y = Array2::zeros((labels.len(), class_count));
    for (i, &c) in labels.iter().enumerate() {
        y[[i, c]] = 1.0;
    }
    y
}

/// An in-memory dataset: labeled pool, text prototypes and optional extras.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pool: EvalSet,
    pub prototypes: PrototypeMatrix,
    /// Per-template text embeddings, C×J×D.
    pub templates: Option<Array3<f64>>,
    pub unlabeled: Option<UnlabeledSet>,
    pub tau: Option<f64>,
    /// Non-fatal issues found on load.
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn new(pool: EvalSet, prototypes: PrototypeMatrix) -> Result<Self> {
        if pool.class_count() != prototypes.class_count() || pool.embeddings().dim() != prototypes.dim() {
            return Err(Error::Shape(format!(
                "pool has C={} D={}, prototypes are {}x{}",
                pool.class_count(),
                pool.embeddings().dim(),
                prototypes.class_count(),
                prototypes.dim()
            )));
        }
        Ok(Self {
            pool,
            prototypes,
            templates: None,
            unlabeled: None,
            tau: None,
            warnings: Vec::new(),
        })
    }

    pub fn class_count(&self) -> usize {
        self.pool.class_count()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub dtype: String,
    pub embeddings: String,
    pub labels: String,
    pub prototypes: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unlabeled: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if manifest.dtype != DTYPE_F32LE {
            return Err(Error::Format(format!(
                "unsupported dtype {:?}, expected {DTYPE_F32LE:?}",
                manifest.dtype
            )));
        }
        if manifest.templates.is_some() != manifest.j.is_some() {
            return Err(Error::Format("`templates` and `j` must be given together".into()));
        }
        if manifest.unlabeled.is_some() != manifest.m.is_some() {
            return Err(Error::Format("`unlabeled` and `m` must be given together".into()));
        }
        Ok(manifest)
    }
}

/// Dataset contents exactly as stored, before any validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub manifest: Manifest,
    pub embeddings: Array2<f64>,
    pub labels: Vec<u32>,
    pub prototypes: Array2<f64>,
    pub templates: Option<Array3<f64>>,
    pub unlabeled: Option<Array2<f64>>,
}

pub fn read_f32le(path: &Path, expected_len: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected_len * 4 {
        return Err(Error::Format(format!(
            "{}: expected {} bytes ({expected_len} f32 values), found {}",
            path.display(),
            expected_len * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn read_u32le(path: &Path, expected_len: usize) -> Result<Vec<u32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected_len * 4 {
        return Err(Error::Format(format!(
            "{}: expected {} bytes ({expected_len} u32 labels), found {}",
            path.display(),
            expected_len * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

pub fn f32le_bytes<'a>(values: impl IntoIterator<Item = &'a f64>) -> Vec<u8> {
    values
        .into_iter()
        .flat_map(|&x| (x as f32).to_le_bytes())
        .collect()
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn blob_path(manifest_path: &Path, name: &str) -> PathBuf {
    manifest_path
        .parent()
        .map(|dir| dir.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}

fn to_f64_matrix(values: Vec<f32>, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols), values.into_iter().map(f64::from).collect())
        .expect("length checked against manifest")
}

/// Reads manifest and blobs without validating contents. Blob sizes are checked.
pub fn read_raw(manifest_path: &Path) -> Result<RawDataset> {
    let manifest = Manifest::read(manifest_path)?;
    let (n, d, c) = (manifest.n, manifest.d, manifest.c);
    let embeddings = to_f64_matrix(
        read_f32le(&blob_path(manifest_path, &manifest.embeddings), n * d)?,
        n,
        d,
    );
    let labels = read_u32le(&blob_path(manifest_path, &manifest.labels), n)?;
    let prototypes = to_f64_matrix(
        read_f32le(&blob_path(manifest_path, &manifest.prototypes), c * d)?,
        c,
        d,
    );
    let templates = match (&manifest.templates, manifest.j) {
        (Some(file), Some(j)) => {
            let raw = read_f32le(&blob_path(manifest_path, file), c * j * d)?;
            Some(
                Array3::from_shape_vec((c, j, d), raw.into_iter().map(f64::from).collect())
                    .expect("length checked against manifest"),
            )
        }
        _ => None,
    };
    let unlabeled = match (&manifest.unlabeled, manifest.m) {
        (Some(file), Some(m)) => Some(to_f64_matrix(
            read_f32le(&blob_path(manifest_path, file), m * d)?,
            m,
            d,
        )),
        _ => None,
    };
    Ok(RawDataset {
        manifest,
        embeddings,
        labels,
        prototypes,
        templates,
        unlabeled,
    })
}

/// Loads, validates and normalizes a dataset.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let raw = read_raw(manifest_path)?;
    let m = &raw.manifest;
    if m.n == 0 || m.d == 0 || m.c == 0 {
        return Err(Error::Format(format!(
            "n, d and c must be positive (n={}, d={}, c={})",
            m.n, m.d, m.c
        )));
    }
    let mut warnings = Vec::new();
    let (embeddings, report) = EmbeddingMatrix::normalized(raw.embeddings)?;
    if !report.warned_rows.is_empty() {
        let msg = format!(
            "{} embedding rows deviated from unit norm by more than {NORM_WARNING} before renormalization (max {:.3}); first: {:?}",
            report.warned_rows.len(),
            report.max_deviation,
            &report.warned_rows[..report.warned_rows.len().min(8)]
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let labels = raw.labels.iter().map(|&y| y as usize).collect();
    let pool = EvalSet::new(embeddings, labels, m.c)?;
    let prototypes = PrototypeMatrix::new(raw.prototypes)
        .map_err(|_| Error::Data("non-finite value in prototypes blob".into()))?;
    if let Some(t) = &raw.templates {
        if t.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("non-finite value in templates blob".into()));
        }
    }
    let unlabeled = match raw.unlabeled {
        Some(u) if u.nrows() == 0 => Some(UnlabeledSet::empty(m.d)),
        Some(u) => {
            let (e, report) = EmbeddingMatrix::normalized(u)?;
            if !report.warned_rows.is_empty() {
                warnings.push(format!(
                    "{} unlabeled rows deviated from unit norm by more than {NORM_WARNING}",
                    report.warned_rows.len()
                ));
            }
            Some(UnlabeledSet::new(e))
        }
        None => None,
    };
    let mut dataset = Dataset::new(pool, prototypes)?;
    dataset.templates = raw.templates;
    dataset.unlabeled = unlabeled;
    dataset.tau = m.tau;
    dataset.warnings = warnings;
    Ok(dataset)
}

/// Writes the manifest and blobs. Blob files are placed next to the manifest and
/// named after its file stem. Output bytes depend only on the dataset contents.
pub fn save_dataset(dataset: &Dataset, manifest_path: &Path) -> Result<()> {
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset");
    let name = |suffix: &str| format!("{stem}.{suffix}.bin");
    let (n, d, c) = (dataset.pool.len(), dataset.dim(), dataset.class_count());

    let mut manifest = Manifest {
        n,
        d,
        c,
        dtype: DTYPE_F32LE.to_string(),
        embeddings: name("embeddings"),
        labels: name("labels"),
        prototypes: name("prototypes"),
        templates: None,
        j: None,
        unlabeled: None,
        m: None,
        tau: dataset.tau,
    };

    write_file(
        &blob_path(manifest_path, &manifest.embeddings),
        &f32le_bytes(dataset.pool.embeddings().view().iter()),
    )?;
    let labels: Vec<u8> = dataset
        .pool
        .labels()
        .iter()
        .flat_map(|&y| (y as u32).to_le_bytes())
        .collect();
    write_file(&blob_path(manifest_path, &manifest.labels), &labels)?;
    write_file(
        &blob_path(manifest_path, &manifest.prototypes),
        &f32le_bytes(dataset.prototypes.view().iter()),
    )?;
    if let Some(t) = &dataset.templates {
        manifest.templates = Some(name("templates"));
        manifest.j = Some(t.dim().1);
        write_file(&blob_path(manifest_path, &name("templates")), &f32le_bytes(t.iter()))?;
    }
    if let Some(u) = &dataset.unlabeled {
        manifest.unlabeled = Some(name("unlabeled"));
        manifest.m = Some(u.len());
        write_file(
            &blob_path(manifest_path, &name("unlabeled")),
            &f32le_bytes(u.embeddings().view().iter()),
        )?;
    }
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(manifest_path, json.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NonFinite,
    Norm,
    LabelOutOfRange,
    Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Which array the violation was found in.
    pub field: &'static str,
    pub index: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn of_kind(&self, kind: ViolationKind) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.kind == kind)
    }
}

/// Checks every stored invariant and lists offending indices. Never fails.
pub fn validate(raw: &RawDataset) -> ValidationReport {
    let mut violations = Vec::new();
    let c = raw.manifest.c;

    let mut check_rows = |field: &'static str, values: ArrayView2<'_, f64>, unit_norm: bool| {
        for (i, row) in values.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|x| !x.is_finite()) {
                violations.push(Violation {
                    kind: ViolationKind::NonFinite,
                    field,
                    index: i,
                    detail: "row contains NaN or Inf".into(),
                });
                continue;
            }
            if unit_norm {
                let norm = row.dot(&row).sqrt();
                if (norm - 1.0).abs() > NORM_TOLERANCE {
                    violations.push(Violation {
                        kind: ViolationKind::Norm,
                        field,
                        index: i,
                        detail: format!("row norm {norm:.6}"),
                    });
                }
            }
        }
    };
    check_rows("embeddings", raw.embeddings.view(), true);
    check_rows("prototypes", raw.prototypes.view(), false);
    if let Some(u) = &raw.unlabeled {
        check_rows("unlabeled", u.view(), true);
    }
    if let Some(t) = &raw.templates {
        for (class, block) in t.axis_iter(Axis(0)).enumerate() {
            if block.iter().any(|x| !x.is_finite()) {
                violations.push(Violation {
                    kind: ViolationKind::NonFinite,
                    field: "templates",
                    index: class,
                    detail: "template block contains NaN or Inf".into(),
                });
            }
        }
    }
    for (i, &y) in raw.labels.iter().enumerate() {
        if y as usize >= c {
            violations.push(Violation {
                kind: ViolationKind::LabelOutOfRange,
                field: "labels",
                index: i,
                detail: format!("label {y} >= class count {c}"),
            });
        }
    }
    if c == 0 || raw.manifest.d == 0 {
        violations.push(Violation {
            kind: ViolationKind::Shape,
            field: "manifest",
            index: 0,
            detail: format!("c={} d={}", c, raw.manifest.d),
        });
    }
    ValidationReport { violations }
}
