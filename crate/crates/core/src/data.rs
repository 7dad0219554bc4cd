//! Datasets: the CIFAR-10 binary format, a synthetic Gaussian-blob task, and
//! seeded minibatch iteration.

use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::Scalar;
use crate::rng::{derive_seed, rng_from_seed, stream};

pub const CIFAR_CLASSES: usize = 10;
pub const CIFAR_DIM: usize = 3072;
pub const CIFAR_RECORD_BYTES: usize = CIFAR_DIM + 1;
pub const CIFAR_RECORDS_PER_FILE: usize = 10_000;
const CHANNEL_PIXELS: usize = 1024;

/// Name of the cached normalization statistics written next to the data.
pub const NORMALIZATION_FILE: &str = "relnet_normalization.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f32>,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f32>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Shape(format!("label {bad} outside 0..{classes}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite dataset feature".into()));
        }
        Ok(Dataset {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &Array2<f32> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f32> {
        self.features.row(i)
    }

    /// Copies the selected rows into a batch of the model's precision.
    pub fn gather<F: Scalar>(&self, indices: &[usize]) -> (Array2<F>, Vec<usize>) {
        let d = self.dim();
        let mut x = Array2::<F>::zeros((indices.len(), d));
        for (dst, &i) in x.rows_mut().into_iter().zip(indices) {
            for (o, &v) in dst.into_iter().zip(self.features.row(i)) {
                *o = F::cast_from(v as f64);
            }
        }
        (x, indices.iter().map(|&i| self.labels[i]).collect())
    }

    /// Rows `start..end` in order, for evaluation.
    pub fn slice<F: Scalar>(&self, start: usize, end: usize) -> (Array2<F>, Vec<usize>) {
        let idx: Vec<usize> = (start..end).collect();
        self.gather(&idx)
    }
}

// ---------------------------------------------------------------------------
// Synthetic blobs

/// `classes` isotropic Gaussian clusters; class `c` is centered at `3 e_c`
/// with per-coordinate noise of standard deviation `spread`.
pub fn synthetic_blobs(
    n_per_class: usize,
    classes: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::Config("blobs need at least 2 classes".into()));
    }
    if dim < classes {
        return Err(Error::Config(format!(
            "blob dimension {dim} is smaller than the class count {classes}"
        )));
    }
    if !spread.is_finite() || spread < 0.0 {
        return Err(Error::Config(format!("blob spread {spread} must be non-negative")));
    }
    let noise = Normal::new(0.0, spread).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let n = n_per_class * classes;
    let mut features = Array2::<f32>::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (row, mut x) in features.rows_mut().into_iter().enumerate() {
        let c = row / n_per_class;
        for (k, v) in x.iter_mut().enumerate() {
            let center = if k == c { 3.0 } else { 0.0 };
            *v = (center + noise.sample(&mut rng)) as f32;
        }
        labels.push(c);
    }
    Dataset::new(features, labels, classes)
}

// ---------------------------------------------------------------------------
// Minibatches

/// Seeded shuffled minibatches for one epoch. The final partial batch is kept.
#[derive(Debug, Clone)]
pub struct BatchIter {
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl BatchIter {
    /// Shuffle order for `(seed, epoch)`.
    pub fn new(len: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        let mut order: Vec<usize> = (0..len).collect();
        let epoch_seed = derive_seed(derive_seed(seed, stream::SHUFFLE), epoch as u64);
        order.shuffle(&mut rng_from_seed(epoch_seed));
        Ok(BatchIter {
            order,
            batch_size,
            pos: 0,
        })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn batch_count(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl Iterator for BatchIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(batch)
    }
}

/// Materialized minibatches of `ds` for one epoch.
pub fn batch_iter<'a, F: Scalar>(
    ds: &'a Dataset,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<impl Iterator<Item = (Array2<F>, Vec<usize>)> + 'a> {
    let batches = BatchIter::new(ds.len(), batch_size, seed, epoch)?;
    Ok(batches.map(move |idx| ds.gather::<F>(&idx)))
}

// ---------------------------------------------------------------------------
// CIFAR-10

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Pixels scaled to `[0, 1]`, then standardized per channel with
    /// training-set statistics.
    #[default]
    Standardize,
    /// Pixels scaled to `[0, 1]` only.
    Raw,
}

/// Per-channel statistics of the training pixels scaled to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

struct RawBatch {
    labels: Vec<u8>,
    pixels: Vec<u8>,
}

fn read_cifar_file(path: &Path, records: usize) -> Result<RawBatch> {
    let bytes = std::fs::read(path).map_err(|e| {
        Error::Format(format!("{}: cannot read CIFAR-10 batch: {e}", path.display()))
    })?;
    let expected = records * CIFAR_RECORD_BYTES;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: expected {expected} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let mut labels = Vec::with_capacity(records);
    let mut pixels = Vec::with_capacity(records * CIFAR_DIM);
    for (i, record) in bytes.chunks_exact(CIFAR_RECORD_BYTES).enumerate() {
        let label = record[0];
        if label as usize >= CIFAR_CLASSES {
            return Err(Error::Format(format!(
                "{}: record {i} has label byte {label} (> 9)",
                path.display()
            )));
        }
        labels.push(label);
        pixels.extend_from_slice(&record[1..]);
    }
    Ok(RawBatch { labels, pixels })
}

fn concat(batches: Vec<RawBatch>) -> RawBatch {
    let mut out = RawBatch {
        labels: Vec::new(),
        pixels: Vec::new(),
    };
    for b in batches {
        out.labels.extend(b.labels);
        out.pixels.extend(b.pixels);
    }
    out
}

/// Channel statistics straight from raw training bytes (population std).
fn channel_stats(pixels: &[u8]) -> ChannelStats {
    let mut sum = [0u64; 3];
    let mut sum_sq = [0u64; 3];
    for record in pixels.chunks_exact(CIFAR_DIM) {
        for (c, plane) in record.chunks_exact(CHANNEL_PIXELS).enumerate() {
            for &p in plane {
                sum[c] += p as u64;
                sum_sq[c] += (p as u64) * (p as u64);
            }
        }
    }
    let count = (pixels.len() / 3) as f64;
    let mut stats = ChannelStats {
        mean: [0.0; 3],
        std: [0.0; 3],
    };
    for c in 0..3 {
        let mean = sum[c] as f64 / count;
        let var = sum_sq[c] as f64 / count - mean * mean;
        stats.mean[c] = mean / 255.0;
        stats.std[c] = var.max(0.0).sqrt() / 255.0;
    }
    stats
}

fn to_dataset(raw: RawBatch, stats: Option<&ChannelStats>) -> Result<Dataset> {
    let n = raw.labels.len();
    let mut lut = [[0f32; 256]; 3];
    for (c, table) in lut.iter_mut().enumerate() {
        for (p, v) in table.iter_mut().enumerate() {
            let x = p as f64 / 255.0;
            *v = match stats {
                Some(s) if s.std[c] > 0.0 => ((x - s.mean[c]) / s.std[c]) as f32,
                Some(s) => (x - s.mean[c]) as f32,
                None => x as f32,
            };
        }
    }
    let values: Vec<f32> = raw
        .pixels
        .iter()
        .enumerate()
        .map(|(i, &p)| lut[(i % CIFAR_DIM) / CHANNEL_PIXELS][p as usize])
        .collect();
    let features = Array2::from_shape_vec((n, CIFAR_DIM), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Dataset::new(
        features,
        raw.labels.into_iter().map(usize::from).collect(),
        CIFAR_CLASSES,
    )
}

/// Training channel statistics: read from the cache next to the data, or
/// computed from the raw bytes and cached.
fn cached_stats(dir: &Path, pixels: &[u8]) -> ChannelStats {
    let path = dir.join(NORMALIZATION_FILE);
    if let Ok(text) = std::fs::read_to_string(&path) {
        match serde_json::from_str::<ChannelStats>(&text) {
            Ok(stats) => return stats,
            Err(e) => log::warn!("ignoring unreadable {}: {e}", path.display()),
        }
    }
    let stats = channel_stats(pixels);
    match serde_json::to_string_pretty(&stats) {
        Ok(json) => {
            if let Err(e) = std::fs::write(&path, json) {
                log::warn!("could not cache normalization stats at {}: {e}", path.display());
            }
        }
        Err(e) => log::warn!("could not serialize normalization stats: {e}"),
    }
    stats
}

pub fn cifar_train_files(dir: &Path) -> Vec<PathBuf> {
    (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect()
}

pub fn cifar_test_file(dir: &Path) -> PathBuf {
    dir.join("test_batch.bin")
}

/// Loads `data_batch_1..5.bin` and `test_batch.bin` (10 000 records each).
pub fn load_cifar10(dir: &Path, normalization: Normalization) -> Result<(Dataset, Dataset)> {
    load_cifar10_records(dir, CIFAR_RECORDS_PER_FILE, normalization)
}

/// As [`load_cifar10`] with a custom record count per file, for fixtures.
pub fn load_cifar10_records(
    dir: &Path,
    records_per_file: usize,
    normalization: Normalization,
) -> Result<(Dataset, Dataset)> {
    let train = concat(
        cifar_train_files(dir)
            .iter()
            .map(|p| read_cifar_file(p, records_per_file))
            .collect::<Result<Vec<_>>>()?,
    );
    let test = read_cifar_file(&cifar_test_file(dir), records_per_file)?;
    let stats = match normalization {
        Normalization::Standardize => Some(cached_stats(dir, &train.pixels)),
        Normalization::Raw => None,
    };
    Ok((
        to_dataset(train, stats.as_ref())?,
        to_dataset(test, stats.as_ref())?,
    ))
}
