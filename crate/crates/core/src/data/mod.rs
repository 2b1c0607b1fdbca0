//! Dataset loading, splitting, standardization and synthetic data.

mod baseline;

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{RegressionDataset, Split};

pub use baseline::{default_gamma_grid, gaussian_kernel_matrix, gaussian_nw_baseline, BaselineReport};

/// Numeric rows with one designated target.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
    pub source: String,
}

impl RawTable {
    pub fn new(features: Array2<f64>, targets: Array1<f64>, source: impl Into<String>) -> Result<Self> {
        crate::error::check_len("target count", features.nrows(), targets.len())?;
        if features.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("table values"));
        }
        Ok(Self {
            features,
            targets,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
            source: self.source.clone(),
        }
    }

    /// Keeps the first `n` rows after a seeded shuffle; no-op when `n >= len`.
    pub fn truncate_shuffled(&self, n: usize, seed: u64) -> Self {
        if n >= self.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut crate::derived_rng(seed, 0));
        idx.truncate(n);
        self.select(&idx)
    }
}

fn parse_err(path: &Path, row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message: message.into(),
    }
}

/// Which CSV column holds the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TargetColumn {
    #[default]
    Last,
    Index(usize),
}

/// Parses a numeric CSV. Rows and columns in errors are 1-based file positions.
pub fn load_csv(path: &Path, target: TargetColumn, has_header: bool) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row_no = r + 1 + usize::from(has_header);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(parse_err(path, row_no, rec.len(), format!("expected {w} columns")));
        }
        let mut vals = Vec::with_capacity(w);
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, row_no, c + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, row_no, c + 1, "non-finite value"));
            }
            vals.push(v);
        }
        rows.push(vals);
    }
    let width = match width {
        Some(w) if !rows.is_empty() => w,
        _ => return Err(Error::Empty("CSV table")),
    };
    let t = match target {
        TargetColumn::Last => width - 1,
        TargetColumn::Index(k) if k < width => k,
        TargetColumn::Index(k) => {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("target column {k} out of range for {width} columns"),
            })
        }
    };
    if width < 2 {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: "need at least one feature column besides the target".into(),
        });
    }
    let n = rows.len();
    let mut features = Array2::zeros((n, width - 1));
    let mut targets = Array1::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        targets[i] = row[t];
        for (k, &v) in row
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != t)
            .map(|(_, v)| v)
            .enumerate()
        {
            features[[i, k]] = v;
        }
    }
    RawTable::new(features, targets, path.display().to_string())
}

/// Parses `label idx:value ...` lines with 1-based indices; width is the
/// largest index seen and absent entries are zero.
pub fn load_libsvm(path: &Path) -> Result<RawTable> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut width = 0;
    for (r, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(path, r + 1, 1, format!("bad label `{label_tok}`")))?;
        let mut entries = Vec::new();
        for (c, tok) in tokens.enumerate() {
            let (idx, val) = tok
                .split_once(':')
                .and_then(|(i, v)| Some((i.parse::<usize>().ok()?, v.parse::<f64>().ok()?)))
                .filter(|(i, v)| *i >= 1 && v.is_finite())
                .ok_or_else(|| parse_err(path, r + 1, c + 2, format!("malformed pair `{tok}`")))?;
            width = width.max(idx);
            entries.push((idx - 1, val));
        }
        labels.push(label);
        sparse.push(entries);
    }
    if labels.is_empty() {
        return Err(Error::Empty("LIBSVM table"));
    }
    let mut features = Array2::zeros((labels.len(), width));
    for (i, entries) in sparse.iter().enumerate() {
        for &(k, v) in entries {
            features[[i, k]] = v;
        }
    }
    RawTable::new(features, Array1::from(labels), path.display().to_string())
}

/// Writes every feature explicitly so the width survives a round trip.
pub fn write_libsvm<W: Write>(table: &RawTable, mut out: W) -> Result<()> {
    for (row, y) in table.features.outer_iter().zip(table.targets.iter()) {
        write!(out, "{y}")?;
        for (k, v) in row.iter().enumerate() {
            write!(out, " {}:{v}", k + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
            shuffle: true,
        }
    }
}

/// Row indices of each side of a split, in the original table's numbering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `floor(train_fraction * N)` rows go to train, the rest to test.
pub fn train_test_split(table: &RawTable, spec: &SplitSpec) -> Result<(RawTable, RawTable, SplitIndices)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let n = table.len();
    if n < 5 {
        return Err(Error::InsufficientData {
            context: "train/test split",
            required: 5,
            actual: n,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if spec.shuffle {
        idx.shuffle(&mut crate::derived_rng(spec.seed, 0));
    }
    let n_train = (spec.train_fraction * n as f64).floor() as usize;
    let test = idx.split_off(n_train);
    let indices = SplitIndices { train: idx, test };
    Ok((table.select(&indices.train), table.select(&indices.test), indices))
}

/// Standardizes features with the table's own population statistics.
pub fn standardize_fit_transform(train: &RawTable) -> Result<RegressionDataset> {
    if train.is_empty() {
        return Err(Error::Empty("training table"));
    }
    let n = train.len() as f64;
    let means = train.features.mean_axis(Axis(0)).expect("non-empty");
    let mut stds = Array1::zeros(train.dim());
    for (k, col) in train.features.columns().into_iter().enumerate() {
        let var = col.iter().map(|v| (v - means[k]).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd < 1e-12 * means[k].abs().max(1.0) {
            return Err(Error::DegenerateFeature { column: k });
        }
        stds[k] = sd;
    }
    standardize_apply_split(train, &means, &stds, Split::Train)
}

/// Applies training statistics to another table.
pub fn standardize_apply(table: &RawTable, means: &Array1<f64>, stds: &Array1<f64>) -> Result<RegressionDataset> {
    standardize_apply_split(table, means, stds, Split::Test)
}

fn standardize_apply_split(
    table: &RawTable,
    means: &Array1<f64>,
    stds: &Array1<f64>,
    split: Split,
) -> Result<RegressionDataset> {
    crate::error::check_len("feature means", table.dim(), means.len())?;
    crate::error::check_len("feature stds", table.dim(), stds.len())?;
    let x = (&table.features - &means.view().insert_axis(Axis(0))) / stds.view().insert_axis(Axis(0));
    Ok(RegressionDataset {
        x,
        y: table.targets.clone(),
        feature_means: means.clone(),
        feature_stds: stds.clone(),
        split,
    })
}

/// Standardized train/test pair from one split.
pub fn prepare(table: &RawTable, spec: &SplitSpec) -> Result<(RegressionDataset, RegressionDataset, SplitIndices)> {
    let (train, test, indices) = train_test_split(table, spec)?;
    let train_ds = standardize_fit_transform(&train)?;
    let test_ds = standardize_apply(&test, &train_ds.feature_means, &train_ds.feature_stds)?;
    Ok((train_ds, test_ds, indices))
}

/// `sin(r) / r` with the removable singularity filled.
pub fn sinc(r: f64) -> f64 {
    if r.abs() < 1e-8 {
        1.0 - r * r / 6.0
    } else {
        r.sin() / r
    }
}

/// `x ~ U(-4, 4)^d`, `y = sinc(|x|) + N(0, noise_std^2)`.
///
/// Inputs and noise come from separate random streams, so the same seed
/// with a different `noise_std` yields the same inputs.
pub fn generate_sinc(n: usize, d: usize, noise_std: f64, seed: u64) -> Result<RawTable> {
    if n < 10 {
        return Err(Error::InsufficientData {
            context: "sinc generator",
            required: 10,
            actual: n,
        });
    }
    if d == 0 || noise_std.is_nan() || noise_std < 0.0 {
        return Err(Error::Config("sinc generator needs d >= 1 and noise_std >= 0".into()));
    }
    let mut xrng = crate::derived_rng(seed, 1);
    let mut nrng = crate::derived_rng(seed, 2);
    let features = Array2::from_shape_simple_fn((n, d), || xrng.random_range(-4.0..4.0));
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let targets = features
        .outer_iter()
        .map(|x: ndarray::ArrayView1<f64>| {
            sinc(x.dot(&x).sqrt()) + if noise_std > 0.0 { noise.sample(&mut nrng) } else { 0.0 }
        })
        .collect();
    RawTable::new(
        features,
        targets,
        format!("sinc(n={n}, d={d}, noise={noise_std}, seed={seed})"),
    )
}

/// Published shape of a benchmark dataset and the row cap applied on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnownDataset {
    pub name: &'static str,
    pub n: usize,
    pub d: usize,
    /// Rows kept after a seeded shuffle when the distributed file is larger.
    pub cap: Option<usize>,
}

pub const KNOWN_DATASETS: [KnownDataset; 4] = [
    KnownDataset {
        name: "bodyfat",
        n: 252,
        d: 14,
        cap: None,
    },
    KnownDataset {
        name: "mg",
        n: 700,
        d: 6,
        cap: Some(700),
    },
    KnownDataset {
        name: "energy",
        n: 768,
        d: 8,
        cap: None,
    },
    KnownDataset {
        name: "ccs",
        n: 700,
        d: 8,
        cap: Some(700),
    },
];

/// Seed of the shuffle used to cap oversized benchmark files.
pub const CAP_SHUFFLE_SEED: u64 = 20_240_601;

/// Looks a dataset up by the stem of its file name (`bodyfat_scale` -> bodyfat).
pub fn known_dataset(path: &Path) -> Option<KnownDataset> {
    let stem = path.file_stem()?.to_str()?.to_ascii_lowercase();
    let head = stem.split(['_', '-', '.']).next()?;
    KNOWN_DATASETS.iter().copied().find(|k| k.name == head)
}

/// Where a table came from, as recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Sinc {
        n: usize,
        d: usize,
        noise_std: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        target: TargetColumn,
        has_header: bool,
    },
    Libsvm {
        path: PathBuf,
    },
}

/// Cache of a standardized split: features, targets and a `split` column.
pub fn write_dataset_cache<W: Write>(train: &RegressionDataset, test: &RegressionDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..train.dim()).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    header.push("split".into());
    w.write_record(&header)?;
    for ds in [train, test] {
        for (row, y) in ds.x.outer_iter().zip(ds.y.iter()) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            rec.push(ds.split.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// JSON sidecar of [`write_dataset_cache`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub source: String,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub split: SplitIndices,
}
