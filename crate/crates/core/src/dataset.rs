//! Embedding datasets: the on-disk directory format, validation, the
//! day-based pool/test split, and a seeded synthetic generator.
//!
//! A dataset directory holds three files:
//!
//! * `manifest.json` with `version`, `num_instances`, `dim`, `num_classes`
//!   and `class_names`;
//! * `embeddings.f32le`, row-major little-endian `f32`, exactly `N * D * 4` bytes;
//! * `instances.csv` with header `index,segment_id,recording_id,day,start_s,labels`,
//!   where `labels` is a `;`-separated list of 0-based class indices (empty for
//!   rows with no positive class).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::rng::rng_from_seed;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.f32le";
pub const INSTANCES_FILE: &str = "instances.csv";
pub const FORMAT_VERSION: u32 = 1;

const INSTANCES_HEADER: [&str; 6] = ["index", "segment_id", "recording_id", "day", "start_s", "labels"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("MissingFile: {0}")]
    MissingFile(PathBuf),
    #[error("SizeMismatch: {what} has {actual} bytes/entries, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("BadLabelIndex: instance {index} has label {label} but num_classes is {num_classes}")]
    BadLabelIndex {
        index: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("DuplicateIndex: instance index {0} appears more than once")]
    DuplicateIndex(usize),
    #[error("IndexOutOfRange: instance index {index} is not below num_instances {num_instances}")]
    IndexOutOfRange { index: usize, num_instances: usize },
    #[error("NonFiniteEmbedding: instance {row}, coordinate {col}")]
    NonFiniteEmbedding { row: usize, col: usize },
    #[error("BadLabelValue: labels[{row}][{col}] = {value} is not 0 or 1")]
    BadLabelValue { row: usize, col: usize, value: u8 },
    #[error("InvalidManifest: {0}")]
    InvalidManifest(String),
    #[error("InvalidClassNames: {0}")]
    InvalidClassNames(String),
    #[error("InvalidMeta: {0}")]
    InvalidMeta(String),
    #[error("BadLabelField: instance {index}: {field:?}")]
    BadLabelField { index: usize, field: String },
    #[error("InvalidSplit: {0}")]
    InvalidSplit(String),
    #[error("UnassignedDay: instance {index} has day {day}, which is in neither pool nor test days")]
    UnassignedDay { index: usize, day: u32 },
    #[error("EmptySplit: the {0} side of the split is empty")]
    EmptySplit(&'static str),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("csv error in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("json error in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl DatasetError {
    /// Short variant name, used by the CLI when reporting the first violation.
    pub fn kind(&self) -> &'static str {
        match self {
            DatasetError::MissingFile(_) => "MissingFile",
            DatasetError::SizeMismatch { .. } => "SizeMismatch",
            DatasetError::BadLabelIndex { .. } => "BadLabelIndex",
            DatasetError::DuplicateIndex(_) => "DuplicateIndex",
            DatasetError::IndexOutOfRange { .. } => "IndexOutOfRange",
            DatasetError::NonFiniteEmbedding { .. } => "NonFiniteEmbedding",
            DatasetError::BadLabelValue { .. } => "BadLabelValue",
            DatasetError::InvalidManifest(_) => "InvalidManifest",
            DatasetError::InvalidClassNames(_) => "InvalidClassNames",
            DatasetError::InvalidMeta(_) => "InvalidMeta",
            DatasetError::BadLabelField { .. } => "BadLabelField",
            DatasetError::InvalidSplit(_) => "InvalidSplit",
            DatasetError::UnassignedDay { .. } => "UnassignedDay",
            DatasetError::EmptySplit(_) => "EmptySplit",
            DatasetError::InvalidConfig(_) => "InvalidConfig",
            DatasetError::Csv { .. } => "Csv",
            DatasetError::Json { .. } => "Json",
            DatasetError::Io { .. } => "Io",
        }
    }
}

/// Per-instance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub index: usize,
    pub segment_id: String,
    pub recording_id: String,
    /// 1-based recording day.
    pub day: u32,
    /// Offset of the segment within its recording, in seconds.
    pub start_s: f64,
}

/// A validated, immutable multi-label embedding dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    class_names: Vec<String>,
    embeddings: Matrix<f32>,
    labels: Matrix<u8>,
    meta: Vec<InstanceMeta>,
}

impl EmbeddingDataset {
    /// Validates and assembles a dataset. `meta[i].index` must equal `i`.
    pub fn new(
        class_names: Vec<String>,
        embeddings: Matrix<f32>,
        labels: Matrix<u8>,
        meta: Vec<InstanceMeta>,
    ) -> Result<Self, DatasetError> {
        let n = embeddings.rows();
        let c = class_names.len();
        if c == 0 {
            return Err(DatasetError::InvalidClassNames("no classes".into()));
        }
        let mut seen = HashSet::with_capacity(c);
        for name in &class_names {
            if name.is_empty() {
                return Err(DatasetError::InvalidClassNames("empty class name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::InvalidClassNames(format!(
                    "duplicate class name {name:?}"
                )));
            }
        }
        if labels.shape() != (n, c) {
            return Err(DatasetError::SizeMismatch {
                what: "labels",
                expected: n * c,
                actual: labels.rows() * labels.cols(),
            });
        }
        if meta.len() != n {
            return Err(DatasetError::SizeMismatch {
                what: "instance metadata",
                expected: n,
                actual: meta.len(),
            });
        }
        for (row, emb) in embeddings.row_iter().enumerate() {
            if let Some(col) = emb.iter().position(|x| !x.is_finite()) {
                return Err(DatasetError::NonFiniteEmbedding { row, col });
            }
        }
        for (row, lab) in labels.row_iter().enumerate() {
            if let Some(col) = lab.iter().position(|&v| v > 1) {
                return Err(DatasetError::BadLabelValue {
                    row,
                    col,
                    value: lab[col],
                });
            }
        }
        for (i, m) in meta.iter().enumerate() {
            if m.index != i {
                return Err(DatasetError::InvalidMeta(format!(
                    "metadata at position {i} carries index {}",
                    m.index
                )));
            }
            if m.day < 1 {
                return Err(DatasetError::InvalidMeta(format!("instance {i}: day must be >= 1")));
            }
            if !(m.start_s.is_finite() && m.start_s >= 0.0) {
                return Err(DatasetError::InvalidMeta(format!(
                    "instance {i}: start_s must be finite and >= 0, got {}",
                    m.start_s
                )));
            }
        }
        Ok(Self {
            class_names,
            embeddings,
            labels,
            meta,
        })
    }

    pub fn num_instances(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn embeddings(&self) -> &Matrix<f32> {
        &self.embeddings
    }

    pub fn labels(&self) -> &Matrix<u8> {
        &self.labels
    }

    pub fn meta(&self) -> &[InstanceMeta] {
        &self.meta
    }

    /// Number of instances whose label row is all zeros.
    pub fn no_bird_count(&self) -> usize {
        self.labels.row_iter().filter(|r| r.iter().all(|&v| v == 0)).count()
    }

    /// Instance counts per recording day, ascending by day.
    pub fn day_histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist = BTreeMap::new();
        for m in &self.meta {
            *hist.entry(m.day).or_insert(0) += 1;
        }
        hist
    }

    /// Embeddings widened to `f64`, optionally L2-normalized per row
    /// (all-zero rows are left unchanged).
    pub fn features(&self, normalize: bool) -> Matrix<f64> {
        let mut x = self.embeddings.map(f64::from);
        if normalize {
            for i in 0..x.rows() {
                let row = x.row_mut(i);
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|v| *v /= norm);
                }
            }
        }
        x
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    num_instances: usize,
    dim: usize,
    num_classes: usize,
    class_names: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceRow {
    index: usize,
    segment_id: String,
    recording_id: String,
    day: u32,
    start_s: f64,
    labels: String,
}

fn require_file(root: &Path, name: &str) -> Result<PathBuf, DatasetError> {
    let path = root.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(DatasetError::MissingFile(path))
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads and validates a dataset directory.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<EmbeddingDataset, DatasetError> {
    let root = root.as_ref();
    let manifest_path = require_file(root, MANIFEST_FILE)?;
    let embeddings_path = require_file(root, EMBEDDINGS_FILE)?;
    let instances_path = require_file(root, INSTANCES_FILE)?;

    let manifest_text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text).map_err(|source| DatasetError::Json {
        path: manifest_path.clone(),
        source,
    })?;
    if manifest.version != FORMAT_VERSION {
        return Err(DatasetError::InvalidManifest(format!(
            "unsupported version {}, expected {FORMAT_VERSION}",
            manifest.version
        )));
    }
    if manifest.class_names.len() != manifest.num_classes {
        return Err(DatasetError::InvalidManifest(format!(
            "num_classes is {} but class_names has {} entries",
            manifest.num_classes,
            manifest.class_names.len()
        )));
    }
    let (n, d, c) = (manifest.num_instances, manifest.dim, manifest.num_classes);
    if d == 0 {
        return Err(DatasetError::InvalidManifest("dim must be >= 1".into()));
    }

    let bytes = fs::read(&embeddings_path).map_err(io_err(&embeddings_path))?;
    let expected = n * d * 4;
    if bytes.len() != expected {
        return Err(DatasetError::SizeMismatch {
            what: EMBEDDINGS_FILE,
            expected,
            actual: bytes.len(),
        });
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let embeddings = Matrix::from_vec(n, d, values).expect("length checked above");

    let csv_err = |source| DatasetError::Csv {
        path: instances_path.clone(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&instances_path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(INSTANCES_HEADER) {
        return Err(DatasetError::InvalidMeta(format!(
            "instances.csv header is {:?}, expected {:?}",
            headers.iter().collect::<Vec<_>>(),
            INSTANCES_HEADER
        )));
    }

    let mut meta: Vec<Option<InstanceMeta>> = vec![None; n];
    let mut labels = Matrix::<u8>::zeros(n, c);
    let mut rows_read = 0usize;
    for record in reader.deserialize::<InstanceRow>() {
        let row = record.map_err(csv_err)?;
        rows_read += 1;
        if row.index >= n {
            return Err(DatasetError::IndexOutOfRange {
                index: row.index,
                num_instances: n,
            });
        }
        if meta[row.index].is_some() {
            return Err(DatasetError::DuplicateIndex(row.index));
        }
        for class in parse_label_field(row.index, &row.labels)? {
            if class >= c {
                return Err(DatasetError::BadLabelIndex {
                    index: row.index,
                    label: class,
                    num_classes: c,
                });
            }
            labels[(row.index, class)] = 1;
        }
        meta[row.index] = Some(InstanceMeta {
            index: row.index,
            segment_id: row.segment_id,
            recording_id: row.recording_id,
            day: row.day,
            start_s: row.start_s,
        });
    }
    if rows_read != n {
        return Err(DatasetError::SizeMismatch {
            what: INSTANCES_FILE,
            expected: n,
            actual: rows_read,
        });
    }
    let meta = meta
        .into_iter()
        .map(|m| m.expect("every index seen exactly once"))
        .collect();

    EmbeddingDataset::new(manifest.class_names, embeddings, labels, meta)
}

fn parse_label_field(index: usize, field: &str) -> Result<Vec<usize>, DatasetError> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|s| {
            s.parse::<usize>().map_err(|_| DatasetError::BadLabelField {
                index,
                field: field.to_owned(),
            })
        })
        .collect()
}

/// Writes a dataset in the directory format, creating the directory if needed.
pub fn write_dataset(ds: &EmbeddingDataset, root: impl AsRef<Path>) -> Result<(), DatasetError> {
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(io_err(root))?;

    let manifest = Manifest {
        version: FORMAT_VERSION,
        num_instances: ds.num_instances(),
        dim: ds.dim(),
        num_classes: ds.num_classes(),
        class_names: ds.class_names.clone(),
    };
    let manifest_path = root.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|source| DatasetError::Json {
        path: manifest_path.clone(),
        source,
    })?;
    text.push('\n');
    fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;

    let embeddings_path = root.join(EMBEDDINGS_FILE);
    let bytes: Vec<u8> = ds.embeddings.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&embeddings_path, bytes).map_err(io_err(&embeddings_path))?;

    let instances_path = root.join(INSTANCES_FILE);
    let csv_err = |source| DatasetError::Csv {
        path: instances_path.clone(),
        source,
    };
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&instances_path)
        .map_err(csv_err)?;
    for (m, lab) in ds.meta.iter().zip(ds.labels.row_iter()) {
        let labels = lab
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(c, _)| c.to_string())
            .collect::<Vec<_>>()
            .join(";");
        writer
            .serialize(InstanceRow {
                index: m.index,
                segment_id: m.segment_id.clone(),
                recording_id: m.recording_id.clone(),
                day: m.day,
                start_s: m.start_s,
                labels,
            })
            .map_err(csv_err)?;
    }
    writer.flush().map_err(io_err(&instances_path))?;
    Ok(())
}

/// Which recording days feed the unlabeled pool and which the test set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub pool_days: BTreeSet<u32>,
    pub test_days: BTreeSet<u32>,
}

impl SplitSpec {
    pub fn new(pool_days: impl IntoIterator<Item = u32>, test_days: impl IntoIterator<Item = u32>) -> Self {
        Self {
            pool_days: pool_days.into_iter().collect(),
            test_days: test_days.into_iter().collect(),
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.pool_days.is_empty() || self.test_days.is_empty() {
            return Err(DatasetError::InvalidSplit(
                "pool_days and test_days must both be non-empty".into(),
            ));
        }
        if let Some(day) = self.pool_days.intersection(&self.test_days).next() {
            return Err(DatasetError::InvalidSplit(format!(
                "day {day} is in both pool_days and test_days"
            )));
        }
        Ok(())
    }
}

/// Ascending dataset indices of the pool and test sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub pool: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions instances by recording day.
pub fn split_pool_test(ds: &EmbeddingDataset, spec: &SplitSpec) -> Result<Split, DatasetError> {
    spec.validate()?;
    let mut pool = Vec::new();
    let mut test = Vec::new();
    for m in &ds.meta {
        if spec.pool_days.contains(&m.day) {
            pool.push(m.index);
        } else if spec.test_days.contains(&m.day) {
            test.push(m.index);
        } else {
            return Err(DatasetError::UnassignedDay {
                index: m.index,
                day: m.day,
            });
        }
    }
    if pool.is_empty() {
        return Err(DatasetError::EmptySplit("pool"));
    }
    if test.is_empty() {
        return Err(DatasetError::EmptySplit("test"));
    }
    Ok(Split { pool, test })
}

/// Parameters of the Gaussian-cluster generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_instances: usize,
    pub dim: usize,
    pub num_classes: usize,
    pub num_clusters: usize,
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
}

fn default_noise_scale() -> f64 {
    SynthConfig::DEFAULT_NOISE_SCALE
}

impl SynthConfig {
    /// Standard deviation of the per-coordinate noise when none is given.
    pub const DEFAULT_NOISE_SCALE: f64 = 0.5;

    pub fn new(num_instances: usize, dim: usize, num_classes: usize, num_clusters: usize) -> Self {
        Self {
            num_instances,
            dim,
            num_classes,
            num_clusters,
            noise_scale: Self::DEFAULT_NOISE_SCALE,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |msg: &str| Err(DatasetError::InvalidConfig(msg.to_owned()));
        if self.num_instances == 0 {
            return bad("num_instances must be >= 1");
        }
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.num_classes == 0 {
            return bad("num_classes must be >= 1");
        }
        if self.num_clusters == 0 {
            return bad("num_clusters must be >= 1");
        }
        if self.num_clusters > self.num_instances {
            return bad("num_clusters must not exceed num_instances");
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return bad("noise_scale must be finite and >= 0");
        }
        Ok(())
    }
}

/// Generates a deterministic multi-label Gaussian-cluster dataset.
///
/// Cluster centers are uniform in `[-1, 1]^D`; each cluster owns a fixed set
/// of one or two classes; each instance picks a cluster uniformly and adds
/// isotropic Gaussian noise. Days alternate 1, 2, 1, 2, ... so that
/// `pool_days = {1}`, `test_days = {2}` is a ready-made split.
pub fn synth_dataset(config: &SynthConfig, seed: u64) -> Result<EmbeddingDataset, DatasetError> {
    config.validate()?;
    let SynthConfig {
        num_instances: n,
        dim: d,
        num_classes: c,
        num_clusters: g,
        noise_scale,
    } = *config;
    let mut rng = rng_from_seed(seed);

    let centers: Vec<Vec<f64>> = (0..g)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let cluster_classes: Vec<Vec<usize>> = (0..g)
        .map(|_| {
            let size = rng.random_range(1..=2usize).min(c);
            let mut classes = index::sample(&mut rng, c, size).into_vec();
            classes.sort_unstable();
            classes
        })
        .collect();

    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut embeddings = Matrix::<f32>::zeros(n, d);
    let mut labels = Matrix::<u8>::zeros(n, c);
    let mut meta = Vec::with_capacity(n);
    for i in 0..n {
        let cluster = rng.random_range(0..g);
        for (dst, &center) in embeddings.row_mut(i).iter_mut().zip(&centers[cluster]) {
            let z: f64 = noise.sample(&mut rng);
            *dst = (center + noise_scale * z) as f32;
        }
        for &class in &cluster_classes[cluster] {
            labels[(i, class)] = 1;
        }
        meta.push(InstanceMeta {
            index: i,
            segment_id: format!("synth-{i:06}"),
            recording_id: format!("synth-cluster-{cluster:03}"),
            day: 1 + (i % 2) as u32,
            start_s: 5.0 * (i / 2) as f64,
        });
    }
    let class_names = (0..c).map(|k| format!("class_{k}")).collect();
    EmbeddingDataset::new(class_names, embeddings, labels, meta)
}
