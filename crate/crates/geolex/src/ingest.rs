//! Streaming ingestion of geolocated JSONL records: parse, filter, match,
//! count.
//!
//! Input lines are independent, so a corpus may be split into shards and
//! processed by parallel workers, each owning a private counts table; the
//! commutative merge in `aggregate` makes the result identical to a
//! single-stream run.

use std::io::BufRead;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{CountsTable, FeatureSpace};
use crate::geogrid::GridSpec;
use crate::lexicon::Matcher;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A geolocated text record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub text: String,
    pub lat: f64,
    pub lon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    text: Option<String>,
    lat: Option<f64>,
    lon: Option<f64>,
    lang: Option<String>,
    ts: Option<String>,
}

/// Why a line was not counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skip {
    Malformed,
    MissingCoordinates,
    OutOfRange,
    WrongLanguage,
    OutOfBbox,
}

/// Geographic bounding box; corner order does not matter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BBox {
    pub fn new(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> BBox {
        BBox {
            lat_min: lat1.min(lat2),
            lat_max: lat1.max(lat2),
            lon_min: lon1.min(lon2),
            lon_max: lon1.max(lon2),
        }
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Filters {
    /// Keep only records whose `lang` tag equals this value.
    pub lang: Option<String>,
    pub bbox: Option<BBox>,
}

/// Parse one JSONL line into a record, or categorize why it is skipped.
pub fn parse_record(line: &str, filters: &Filters) -> Result<Record, Skip> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|_| Skip::Malformed)?;
    let text = match raw.text {
        Some(t) if !t.is_empty() => t,
        _ => return Err(Skip::Malformed),
    };
    let (lat, lon) = match (raw.lat, raw.lon) {
        (Some(lat), Some(lon)) => (lat, lon),
        _ => return Err(Skip::MissingCoordinates),
    };
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(Skip::OutOfRange);
    }
    if let Some(want) = &filters.lang {
        if raw.lang.as_deref() != Some(want.as_str()) {
            return Err(Skip::WrongLanguage);
        }
    }
    if let Some(bbox) = &filters.bbox {
        if !bbox.contains(lat, lon) {
            return Err(Skip::OutOfBbox);
        }
    }
    Ok(Record {
        text,
        lat,
        lon,
        lang: raw.lang,
        ts: raw.ts,
    })
}

/// Ingestion counters. `lines_read = records_kept + total_skipped` and
/// `hits` equals the sum of counts in the produced table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines_read: u64,
    pub records_kept: u64,
    pub hits: u64,
    pub skipped_malformed: u64,
    pub skipped_missing_coordinates: u64,
    pub skipped_out_of_range: u64,
    pub skipped_wrong_language: u64,
    pub skipped_out_of_bbox: u64,
}

impl IngestReport {
    pub fn total_skipped(&self) -> u64 {
        self.skipped_malformed
            + self.skipped_missing_coordinates
            + self.skipped_out_of_range
            + self.skipped_wrong_language
            + self.skipped_out_of_bbox
    }

    fn record_skip(&mut self, skip: Skip) {
        match skip {
            Skip::Malformed => self.skipped_malformed += 1,
            Skip::MissingCoordinates => self.skipped_missing_coordinates += 1,
            Skip::OutOfRange => self.skipped_out_of_range += 1,
            Skip::WrongLanguage => self.skipped_wrong_language += 1,
            Skip::OutOfBbox => self.skipped_out_of_bbox += 1,
        }
    }

    pub fn merge(&mut self, other: &IngestReport) {
        self.lines_read += other.lines_read;
        self.records_kept += other.records_kept;
        self.hits += other.hits;
        self.skipped_malformed += other.skipped_malformed;
        self.skipped_missing_coordinates += other.skipped_missing_coordinates;
        self.skipped_out_of_range += other.skipped_out_of_range;
        self.skipped_wrong_language += other.skipped_wrong_language;
        self.skipped_out_of_bbox += other.skipped_out_of_bbox;
    }

    pub fn summary(&self) -> String {
        format!(
            "read {} lines: kept {}, hits {}, skipped {} (malformed {}, missing-coords {}, out-of-range {}, wrong-language {}, out-of-bbox {})",
            self.lines_read,
            self.records_kept,
            self.hits,
            self.total_skipped(),
            self.skipped_malformed,
            self.skipped_missing_coordinates,
            self.skipped_out_of_range,
            self.skipped_wrong_language,
            self.skipped_out_of_bbox,
        )
    }
}

/// Ingest one stream of JSONL records.
pub fn ingest_stream(
    reader: impl BufRead,
    matcher: &Matcher,
    grid: GridSpec,
    filters: &Filters,
) -> Result<(CountsTable, IngestReport), IngestError> {
    let space = FeatureSpace::from_matcher(matcher);
    let mut counts = CountsTable::new(grid, space);
    let mut report = IngestReport::default();
    ingest_into(reader, matcher, grid, filters, &mut counts, &mut report)?;
    Ok((counts, report))
}

fn ingest_into(
    reader: impl BufRead,
    matcher: &Matcher,
    grid: GridSpec,
    filters: &Filters,
    counts: &mut CountsTable,
    report: &mut IngestReport,
) -> Result<(), IngestError> {
    for line in reader.lines() {
        let line = line?;
        report.lines_read += 1;
        match parse_record(&line, filters) {
            Ok(record) => {
                report.records_kept += 1;
                let cell = grid
                    .cell_of(record.lat, record.lon)
                    .expect("range-checked coordinates");
                for hit in matcher.match_text(&record.text) {
                    counts.increment(cell, hit.feature, 1);
                    report.hits += 1;
                }
            }
            Err(skip) => report.record_skip(skip),
        }
    }
    Ok(())
}

/// Ingest shards on up to `threads` workers and merge the per-shard tables.
/// Results are identical to a sequential run for any thread count.
pub fn ingest_shards<R: BufRead + Send>(
    shards: Vec<R>,
    matcher: &Matcher,
    grid: GridSpec,
    filters: &Filters,
    threads: usize,
) -> Result<(CountsTable, IngestReport), IngestError> {
    let space = FeatureSpace::from_matcher(matcher);
    let workers = threads.max(1).min(shards.len().max(1));
    if workers <= 1 {
        let mut counts = CountsTable::new(grid, space);
        let mut report = IngestReport::default();
        for shard in shards {
            ingest_into(shard, matcher, grid, filters, &mut counts, &mut report)?;
        }
        return Ok((counts, report));
    }

    let queue = Mutex::new(shards.into_iter());
    let results: Vec<Result<(CountsTable, IngestReport), IngestError>> =
        std::thread::scope(|scope| {
            let queue = &queue;
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    let space = Arc::clone(&space);
                    scope.spawn(move || {
                        let mut counts = CountsTable::new(grid, space);
                        let mut report = IngestReport::default();
                        loop {
                            // take the next shard; the guard must drop before
                            // the (slow) ingest call or workers serialize
                            let shard = queue.lock().unwrap().next();
                            let Some(shard) = shard else { break };
                            ingest_into(shard, matcher, grid, filters, &mut counts, &mut report)?;
                        }
                        Ok((counts, report))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });

    let mut counts = CountsTable::new(grid, Arc::clone(&space));
    let mut report = IngestReport::default();
    for result in results {
        let (c, r) = result?;
        counts.merge(c).expect("shards share grid and lexicon");
        report.merge(&r);
    }
    Ok((counts, report))
}
