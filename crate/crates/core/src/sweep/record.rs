use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Column order of the sweep CSV.
pub const CSV_HEADER: [&str; 19] = [
    "family",
    "communities",
    "p",
    "gamma",
    "m",
    "mu",
    "width",
    "rounds",
    "seed",
    "status",
    "nodes_realized",
    "bridges",
    "mean_degree",
    "clustering",
    "avg_path_len",
    "modularity",
    "cross_density",
    "top1_error",
    "wall_ms",
];

pub const STATUS_OK: &str = "ok";

/// One `(grid cell, seed)` outcome. Field order is the CSV column order;
/// `None` serializes as an empty field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub family: String,
    pub communities: usize,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub m: Option<f64>,
    pub mu: Option<f64>,
    pub width: usize,
    pub rounds: usize,
    pub seed: u64,
    /// `ok`, or `error: <message>`.
    pub status: String,
    pub nodes_realized: Option<usize>,
    pub bridges: Option<usize>,
    pub mean_degree: Option<f64>,
    pub clustering: Option<f64>,
    pub avg_path_len: Option<f64>,
    pub modularity: Option<f64>,
    pub cross_density: Option<f64>,
    pub top1_error: Option<f64>,
    pub wall_ms: Option<u64>,
}

/// Identity of a record's configuration, seed included. Floats are stored as
/// order-preserving bit patterns, so keys compare exactly and sort numerically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub family: String,
    pub communities: usize,
    pub p: Option<u64>,
    pub gamma: Option<u64>,
    pub m: Option<u64>,
    pub mu: Option<u64>,
    pub width: usize,
    pub rounds: usize,
    pub seed: u64,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    pub fn key(&self) -> RecordKey {
        let bits = |v: Option<f64>| v.map(ordered_bits);
        RecordKey {
            family: self.family.clone(),
            communities: self.communities,
            p: bits(self.p),
            gamma: bits(self.gamma),
            m: bits(self.m),
            mu: bits(self.mu),
            width: self.width,
            rounds: self.rounds,
            seed: self.seed,
        }
    }
}

/// Bit pattern whose unsigned order matches `f64::total_cmp`.
pub(crate) fn ordered_bits(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | 1 << 63
    }
}

pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r)?;
    }
    if records.is_empty() {
        writer.write_record(CSV_HEADER)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<ExperimentRecord>> {
    read_records(std::fs::File::open(path)?)
}

pub fn write_records_file(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_records(std::io::BufWriter::new(file), records)
}

/// Appends one row, writing the header first when the file is new or empty.
pub fn append_record(path: &Path, record: &ExperimentRecord) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(file);
    writer.serialize(record)?;
    writer.flush()?;
    Ok(())
}
