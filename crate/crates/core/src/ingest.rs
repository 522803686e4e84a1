//! Dataset ingestion: JSONL/CSV parsing with validation, segment-sequence
//! summarization, and per-feature statistics.
//!
//! JSONL is the canonical on-disk format (one record per line). CSV is
//! supported with pipe-separated list cells; an empty cell is a missing
//! value. Records are validated on parse, so a loaded dataset satisfies all
//! record invariants.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{SegmentSequence, TrackRecord};

/// Columns with dedicated meaning in the CSV layout; everything else is a
/// numeric feature column.
const CSV_RESERVED: [&str; 6] = [
    "track_id",
    "artist_id",
    "artist_name",
    "title",
    "artist_terms",
    "similar_artists",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// Infer the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("duplicate track_id {0:?}")]
    DuplicateTrackId(String),
    #[error("{path}: missing required column {column:?}")]
    Schema { path: String, column: String },
    #[error("dataset is empty")]
    EmptyDataset,
}

impl IngestError {
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::Io { .. } => "IoError",
            IngestError::Parse { .. } => "ParseError",
            IngestError::DuplicateTrackId(_) => "DuplicateTrackId",
            IngestError::Schema { .. } => "SchemaError",
            IngestError::EmptyDataset => "EmptyDataset",
        }
    }
}

/// Load every record of one file, in file order. Duplicate track ids are
/// rejected with the offending id.
pub fn load_dataset(path: &Path, format: Format) -> Result<Vec<TrackRecord>, IngestError> {
    let records = match format {
        Format::Jsonl => load_jsonl(path)?,
        Format::Csv => load_csv(path)?,
    };
    let mut seen = HashSet::with_capacity(records.len());
    for r in &records {
        if !seen.insert(r.track_id.as_str()) {
            return Err(IngestError::DuplicateTrackId(r.track_id.clone()));
        }
    }
    Ok(records)
}

/// Load several files in parallel and merge them in path-sorted order, so
/// the result does not depend on argument order or scheduling. Track ids
/// must be unique across the whole collection.
pub fn load_datasets(paths: &[PathBuf]) -> Result<Vec<TrackRecord>, IngestError> {
    let mut sorted: Vec<&PathBuf> = paths.iter().collect();
    sorted.sort();
    let loaded: Vec<Result<Vec<TrackRecord>, IngestError>> = sorted
        .par_iter()
        .map(|p| load_dataset(p, Format::from_path(p)))
        .collect();
    let mut records = Vec::new();
    for part in loaded {
        records.extend(part?);
    }
    let mut seen = HashSet::with_capacity(records.len());
    for r in &records {
        if !seen.insert(r.track_id.as_str()) {
            return Err(IngestError::DuplicateTrackId(r.track_id.clone()));
        }
    }
    Ok(records)
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn load_jsonl(path: &Path) -> Result<Vec<TrackRecord>, IngestError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrackRecord =
            serde_json::from_str(&line).map_err(|e| IngestError::Parse {
                path: path.display().to_string(),
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

fn split_list(cell: &str) -> Vec<String> {
    cell.split('|')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn load_csv(path: &Path) -> Result<Vec<TrackRecord>, IngestError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::Parse {
            path: path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    for required in ["track_id", "artist_id"] {
        if !headers.iter().any(|h| h == required) {
            return Err(IngestError::Schema {
                path: path.display().to_string(),
                column: required.to_string(),
            });
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let track_col = col("track_id").unwrap();
    let artist_col = col("artist_id").unwrap();
    let name_col = col("artist_name");
    let title_col = col("title");
    let terms_col = col("artist_terms");
    let similar_col = col("similar_artists");
    let feature_cols: Vec<(usize, &String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !CSV_RESERVED.contains(&h.as_str()))
        .collect();

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| IngestError::Parse {
            path: path.display().to_string(),
            line: e
                .position()
                .map(|p| p.line())
                .unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let parse = |msg: String| IngestError::Parse {
            path: path.display().to_string(),
            line,
            message: msg,
        };
        if row.len() != headers.len() {
            return Err(parse(format!(
                "expected {} fields, found {}",
                headers.len(),
                row.len()
            )));
        }
        let cell = |i: usize| row.get(i).unwrap_or("");
        let mut features = BTreeMap::new();
        for &(i, name) in &feature_cols {
            let raw = cell(i);
            if raw.is_empty() {
                continue;
            }
            let value: f64 = raw
                .parse()
                .map_err(|_| parse(format!("column {name:?}: invalid number {raw:?}")))?;
            if !value.is_finite() {
                return Err(parse(format!("column {name:?}: non-finite value {raw:?}")));
            }
            features.insert(name.clone(), value);
        }
        let record = TrackRecord::new(
            cell(track_col).to_string(),
            cell(artist_col).to_string(),
            name_col.map(cell).unwrap_or_default().to_string(),
            title_col.map(cell).unwrap_or_default().to_string(),
            terms_col.map(cell).map(split_list).unwrap_or_default(),
            similar_col.map(cell).map(split_list).unwrap_or_default(),
            features,
            None,
        )
        .map_err(|e| parse(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

/// Write records as JSONL, one canonical-order record per line.
pub fn write_jsonl(path: &Path, records: &[TrackRecord]) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Write records as CSV. Feature columns are the sorted union of feature
/// names across records; list cells are pipe-separated; segment sequences
/// are not representable in CSV and are omitted.
pub fn write_csv(path: &Path, records: &[TrackRecord]) -> Result<(), IngestError> {
    let mut feature_names: Vec<&str> = records
        .iter()
        .flat_map(|r| r.features.keys().map(String::as_str))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    feature_names.sort_unstable();

    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<&str> = CSV_RESERVED.to_vec();
    header.extend(feature_names.iter().copied());
    writer
        .write_record(&header)
        .map_err(|e| IngestError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
    for r in records {
        let mut row: Vec<String> = vec![
            r.track_id.clone(),
            r.artist_id.clone(),
            r.artist_name.clone(),
            r.title.clone(),
            r.artist_terms.join("|"),
            r.similar_artists.join("|"),
        ];
        for name in &feature_names {
            row.push(
                r.features
                    .get(*name)
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        writer.write_record(&row).map_err(|e| IngestError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Summarize a segment sequence into fixed-length features: the
/// component-wise mean of the timbre vectors (`timbre_mean_0..w-1`), the
/// sequence length (`segments_count`), and the mean confidence
/// (`segments_confidence_mean`) when confidence values are present. An
/// empty sequence yields only `segments_count = 0`.
pub fn summarize_segments(seq: &SegmentSequence) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let n = seq.len();
    out.insert("segments_count".to_string(), n as f64);
    if n == 0 {
        return out;
    }
    let w = seq.width();
    let mut sums = vec![0.0f64; w];
    for step in seq.timbre() {
        for (s, x) in sums.iter_mut().zip(step) {
            *s += x;
        }
    }
    for (i, s) in sums.iter().enumerate() {
        out.insert(format!("timbre_mean_{i}"), s / n as f64);
    }
    if let Some(conf) = seq.confidence() {
        out.insert(
            "segments_confidence_mean".to_string(),
            conf.iter().sum::<f64>() / n as f64,
        );
    }
    out
}

/// Merge segment summaries into each record's feature map. Explicit
/// features win; summaries only fill absent keys.
pub fn merge_segment_features(records: &mut [TrackRecord]) {
    for r in records {
        if let Some(seq) = &r.segments {
            for (name, value) in summarize_segments(seq) {
                r.features.entry(name).or_insert(value);
            }
        }
    }
}

/// Per-feature statistics over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStats {
    pub feature_name: String,
    pub count_present: usize,
    pub count_missing: usize,
    pub mean: f64,
    /// Population variance over present values; 0 when fewer than two are
    /// present.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

impl FeatureStats {
    /// Fraction of records in which the feature is missing.
    pub fn missing_fraction(&self) -> f64 {
        let total = self.count_present + self.count_missing;
        if total == 0 {
            0.0
        } else {
            self.count_missing as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Accumulator {
    count: usize,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    /// Chan et al. pairwise merge of (count, mean, M2) accumulators.
    fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let delta = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += delta * n2 / n;
        self.m2 += other.m2 + delta * delta * n1 * n2 / n;
        self.count += other.count;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }
}

/// Rows per parallel chunk; fixed so the merge tree (and therefore the
/// floating-point result) does not depend on the worker count.
const STATS_CHUNK: usize = 1024;

/// Compute one [`FeatureStats`] per feature name appearing in any record,
/// sorted by name.
pub fn compute_stats(records: &[TrackRecord]) -> Result<Vec<FeatureStats>, IngestError> {
    compute_stats_chunked(records, STATS_CHUNK)
}

fn compute_stats_chunked(
    records: &[TrackRecord],
    chunk: usize,
) -> Result<Vec<FeatureStats>, IngestError> {
    if records.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    // Partial accumulators per chunk, merged in ascending chunk order.
    let partials: Vec<BTreeMap<&str, Accumulator>> = records
        .par_chunks(chunk)
        .map(|rows| {
            let mut acc: BTreeMap<&str, Accumulator> = BTreeMap::new();
            for r in rows {
                for (name, value) in &r.features {
                    acc.entry(name.as_str()).or_insert_with(Accumulator::new).push(*value);
                }
            }
            acc
        })
        .collect();
    let mut merged: BTreeMap<&str, Accumulator> = BTreeMap::new();
    for part in &partials {
        for (name, acc) in part {
            merged.entry(name).or_insert_with(Accumulator::new).merge(acc);
        }
    }
    let n = records.len();
    Ok(merged
        .into_iter()
        .map(|(name, acc)| FeatureStats {
            feature_name: name.to_string(),
            count_present: acc.count,
            count_missing: n - acc.count,
            mean: if acc.count == 0 { 0.0 } else { acc.mean },
            variance: if acc.count <= 1 {
                0.0
            } else {
                acc.m2 / acc.count as f64
            },
            min: acc.min,
            max: acc.max,
        })
        .collect())
}
