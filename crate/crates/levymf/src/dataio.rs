//! Dataset parsing (MovieLens formats), dense index remapping, and result
//! serialization (bench CSV + JSON run manifests).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ModelError, RatingDataset, RatingTriple};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed line: {reason}")]
    Malformed { path: String, line: usize, reason: String },
    #[error("{path} contains no ratings")]
    EmptyFile { path: String },
    #[error("no rows to write")]
    EmptyRows,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Bijective map between raw (possibly sparse, 1-based) ids and dense
/// 0-based indices, in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct IdMap {
    forward: HashMap<u64, usize>,
    reverse: Vec<u64>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dense index for `raw`, allocating the next index on first sight.
    pub fn index_of(&mut self, raw: u64) -> usize {
        if let Some(&idx) = self.forward.get(&raw) {
            return idx;
        }
        let idx = self.reverse.len();
        self.forward.insert(raw, idx);
        self.reverse.push(raw);
        idx
    }

    pub fn get(&self, raw: u64) -> Option<usize> {
        self.forward.get(&raw).copied()
    }

    /// Raw id behind a dense index.
    pub fn raw(&self, index: usize) -> u64 {
        self.reverse[index]
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    /// Identity map over `0..n`, for data that is already densely indexed.
    pub fn identity(n: usize) -> Self {
        let mut map = Self::new();
        for raw in 0..n as u64 {
            map.index_of(raw);
        }
        map
    }
}

/// Parses the MovieLens 1M `ratings.dat` format:
/// `UserID::MovieID::Rating::Timestamp`. Timestamps are discarded, ids are
/// densely remapped in first-seen order.
pub fn parse_movielens_1m(
    path: impl AsRef<Path>,
) -> Result<(RatingDataset, IdMap, IdMap), DataError> {
    parse_delimited(path.as_ref(), "::")
}

/// Parses the MovieLens 100k `u.data` format: tab-separated
/// `user item rating timestamp`. A trailing timestamp column is optional so
/// that re-emitted splits parse back.
pub fn parse_movielens_100k(
    path: impl AsRef<Path>,
) -> Result<(RatingDataset, IdMap, IdMap), DataError> {
    parse_delimited(path.as_ref(), "\t")
}

fn parse_delimited(path: &Path, delim: &str) -> Result<(RatingDataset, IdMap, IdMap), DataError> {
    let display = path.display().to_string();
    let io_err = |source| DataError::Io { path: display.clone(), source };
    let file = File::open(path).map_err(io_err)?;
    let reader = BufReader::new(file);

    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut triples = Vec::new();

    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io { path: display.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(delim);
        let malformed = |reason: &str| DataError::Malformed {
            path: display.clone(),
            line: line_no + 1,
            reason: reason.to_string(),
        };
        let raw_user: u64 = fields
            .next()
            .ok_or_else(|| malformed("missing user id"))?
            .trim()
            .parse()
            .map_err(|_| malformed("user id is not an integer"))?;
        let raw_item: u64 = fields
            .next()
            .ok_or_else(|| malformed("missing item id"))?
            .trim()
            .parse()
            .map_err(|_| malformed("item id is not an integer"))?;
        let rating: f64 = fields
            .next()
            .ok_or_else(|| malformed("missing rating"))?
            .trim()
            .parse()
            .map_err(|_| malformed("rating is not a number"))?;
        triples.push(RatingTriple::new(users.index_of(raw_user), items.index_of(raw_item), rating));
    }

    if triples.is_empty() {
        return Err(DataError::EmptyFile { path: display });
    }
    let dataset = RatingDataset::new(users.len(), items.len(), triples)?;
    Ok((dataset, users, items))
}

/// Writes triples back out through the reverse id maps, tab-separated
/// `raw_user raw_item rating`. Re-parsing with [`parse_movielens_100k`]
/// reproduces the `(user, item, rating)` multiset.
pub fn emit_triples(
    data: &RatingDataset,
    users: &IdMap,
    items: &IdMap,
    path: impl AsRef<Path>,
) -> Result<(), DataError> {
    let display = path.as_ref().display().to_string();
    let io_err = |source| DataError::Io { path: display.clone(), source };
    let mut out = std::io::BufWriter::new(File::create(path.as_ref()).map_err(io_err)?);
    for t in data.triples() {
        writeln!(out, "{}\t{}\t{}", users.raw(t.user), items.raw(t.item), t.rating)
            .map_err(|source| DataError::Io { path: display.clone(), source })?;
    }
    out.flush().map_err(|source| DataError::Io { path: display, source })
}

/// One summary row of a benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub system: String,
    /// Key=value pairs joined with `;` (commas would break the CSV).
    pub params: String,
    pub rmse_mean: f64,
    pub rmse_spread: f64,
    pub seeds: usize,
    pub wall_ms: u64,
}

/// Writes the bench table: a fixed header then one comma-separated row per
/// entry, newline-terminated UTF-8.
pub fn write_bench_csv(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<(), DataError> {
    if rows.is_empty() {
        return Err(DataError::EmptyRows);
    }
    let display = path.as_ref().display().to_string();
    let io_err = |source| DataError::Io { path: display.clone(), source };
    let mut out = std::io::BufWriter::new(File::create(path.as_ref()).map_err(io_err)?);
    let write_err = |source| DataError::Io { path: display.clone(), source };
    writeln!(out, "system,params,rmse_mean,rmse_spread,seeds,wall_ms").map_err(write_err)?;
    for row in rows {
        debug_assert!(!row.system.contains(',') && !row.params.contains(','));
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.system, row.params, row.rmse_mean, row.rmse_spread, row.seeds, row.wall_ms
        )
        .map_err(|source| DataError::Io { path: display.clone(), source })?;
    }
    out.flush().map_err(|source| DataError::Io { path: display, source })
}

/// Everything needed to reproduce a run bit-exactly with the same binary:
/// dataset identity, split settings, the full solver configuration, and the
/// generator algorithm.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub rng_algorithm: String,
    pub dataset: DatasetStamp,
    pub test_fraction: f64,
    pub split_mode: String,
    pub seeds: Vec<u64>,
    pub solver: serde_json::Value,
    pub clamp: Option<(f64, f64)>,
}

/// Identity of the ingested dataset.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetStamp {
    pub source: String,
    pub format: String,
    pub sha256: String,
    pub num_users: usize,
    pub num_items: usize,
    pub num_ratings: usize,
}

pub fn write_manifest(manifest: &RunManifest, path: impl AsRef<Path>) -> Result<(), DataError> {
    let display = path.as_ref().display().to_string();
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(path.as_ref(), json + "\n")
        .map_err(|source| DataError::Io { path: display, source })
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String, DataError> {
    let display = path.as_ref().display().to_string();
    let io_err = |source| DataError::Io { path: display.clone(), source };
    let mut file = File::open(path.as_ref()).map_err(io_err)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|source| DataError::Io {
            path: display.clone(),
            source,
        })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

/// SHA-256 of an in-memory description (synthetic datasets), lowercase hex.
pub fn string_sha256(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
