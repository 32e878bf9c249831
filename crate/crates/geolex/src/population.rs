//! Population contrast between clusters using a gridded raster (ESRI ASCII
//! grid format).
//!
//! Cells are sampled pointwise at their centers (nearest raster cell); nodata
//! and out-of-extent cells are excluded from statistics and reported as
//! missing.

use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::cluster::ClusterAssignments;
use crate::geogrid::GridSpec;

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("raster parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("raster has {got} values, header implies {want}")]
    ShapeMismatch { want: usize, got: usize },
    #[error("no model cell overlaps the raster")]
    EmptyOverlap,
}

/// Gridded surface; values stored row-major, first row = northmost.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: Option<f64>,
    values: Vec<f64>,
}

impl Raster {
    pub fn load(path: &Path) -> Result<Raster, PopulationError> {
        let file = std::fs::File::open(path)?;
        Raster::read(std::io::BufReader::new(file))
    }

    pub fn read(reader: impl BufRead) -> Result<Raster, PopulationError> {
        let mut ncols = None;
        let mut nrows = None;
        let mut xllcorner = None;
        let mut yllcorner = None;
        let mut cellsize = None;
        let mut nodata = None;
        let mut values: Vec<f64> = Vec::new();

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let first = parts.next().unwrap();
            let is_header = values.is_empty() && first.chars().next().is_some_and(char::is_alphabetic);
            if is_header {
                let key = first.to_ascii_lowercase();
                let value = parts.next().ok_or(PopulationError::Parse {
                    line: line_no,
                    message: format!("header {key} missing value"),
                })?;
                let parse_f64 = |v: &str| {
                    v.parse::<f64>().map_err(|_| PopulationError::Parse {
                        line: line_no,
                        message: format!("bad number {v:?}"),
                    })
                };
                match key.as_str() {
                    "ncols" => ncols = Some(parse_f64(value)? as usize),
                    "nrows" => nrows = Some(parse_f64(value)? as usize),
                    "xllcorner" => xllcorner = Some(parse_f64(value)?),
                    "yllcorner" => yllcorner = Some(parse_f64(value)?),
                    "cellsize" => cellsize = Some(parse_f64(value)?),
                    "nodata_value" => nodata = Some(parse_f64(value)?),
                    other => {
                        return Err(PopulationError::Parse {
                            line: line_no,
                            message: format!("unknown header key {other:?}"),
                        })
                    }
                }
            } else {
                for tok in trimmed.split_whitespace() {
                    values.push(tok.parse::<f64>().map_err(|_| PopulationError::Parse {
                        line: line_no,
                        message: format!("bad value {tok:?}"),
                    })?);
                }
            }
        }

        let (Some(ncols), Some(nrows), Some(xllcorner), Some(yllcorner), Some(cellsize)) =
            (ncols, nrows, xllcorner, yllcorner, cellsize)
        else {
            return Err(PopulationError::Parse {
                line: 1,
                message: "missing required header (ncols/nrows/xllcorner/yllcorner/cellsize)"
                    .into(),
            });
        };
        if ncols == 0 || nrows == 0 || cellsize <= 0.0 {
            return Err(PopulationError::Parse {
                line: 1,
                message: "dimensions and cellsize must be positive".into(),
            });
        }
        if values.len() != ncols * nrows {
            return Err(PopulationError::ShapeMismatch {
                want: ncols * nrows,
                got: values.len(),
            });
        }
        Ok(Raster {
            ncols,
            nrows,
            xllcorner,
            yllcorner,
            cellsize,
            nodata,
            values,
        })
    }

    /// Value of the raster cell containing the point; None outside the extent
    /// or on nodata.
    pub fn sample(&self, lat: f64, lon: f64) -> Option<f64> {
        let col = ((lon - self.xllcorner) / self.cellsize).floor();
        let row_from_south = ((lat - self.yllcorner) / self.cellsize).floor();
        if col < 0.0
            || row_from_south < 0.0
            || col >= self.ncols as f64
            || row_from_south >= self.nrows as f64
        {
            return None;
        }
        let row = self.nrows - 1 - row_from_south as usize;
        let v = self.values[row * self.ncols + col as usize];
        if self.nodata.is_some_and(|nd| v == nd) {
            return None;
        }
        Some(v)
    }
}

/// One decade of the log-binned histogram: values in [lo, hi).
#[derive(Debug, Clone, PartialEq)]
pub struct LogBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPopStats {
    pub label: String,
    pub n_cells: usize,
    pub mean: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub missing: usize,
    /// Values ≤ 0 (log-unbinnable) counted separately.
    pub nonpositive: u64,
    pub histogram: Vec<LogBin>,
}

/// Per-cluster population summary, sampled at cell centers.
pub fn cluster_population_stats(
    assignments: &ClusterAssignments,
    raster: &Raster,
    grid: GridSpec,
) -> Result<Vec<ClusterPopStats>, PopulationError> {
    let k = assignments.labels.len();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut missing = vec![0usize; k];
    for (cell, &a) in assignments.cells.iter().zip(&assignments.assignments) {
        let (lat, lon) = grid.cell_center(*cell).expect("cell from model");
        match raster.sample(lat, lon) {
            Some(v) => samples[a].push(v),
            None => missing[a] += 1,
        }
    }
    if samples.iter().all(Vec::is_empty) {
        return Err(PopulationError::EmptyOverlap);
    }
    let stats = assignments
        .labels
        .iter()
        .enumerate()
        .map(|(i, label)| summarize(label, &mut samples[i], missing[i]))
        .collect();
    Ok(stats)
}

fn summarize(label: &str, values: &mut [f64], missing: usize) -> ClusterPopStats {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    let mean = if n == 0 {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / n as f64
    };
    ClusterPopStats {
        label: label.to_string(),
        n_cells: n,
        mean,
        p25: quantile(values, 0.25),
        p50: quantile(values, 0.50),
        p75: quantile(values, 0.75),
        missing,
        nonpositive: values.iter().filter(|&&v| v <= 0.0).count() as u64,
        histogram: log_histogram(values),
    }
}

/// Linear interpolation between order statistics (sorted input).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Decade bins [10^e, 10^{e+1}) covering the positive values.
fn log_histogram(sorted: &[f64]) -> Vec<LogBin> {
    let positives: Vec<f64> = sorted.iter().copied().filter(|&v| v > 0.0).collect();
    let (Some(&min), Some(&max)) = (positives.first(), positives.last()) else {
        return Vec::new();
    };
    let lo_exp = min.log10().floor() as i32;
    let hi_exp = max.log10().floor() as i32;
    (lo_exp..=hi_exp)
        .map(|e| {
            let lo = 10f64.powi(e);
            let hi = 10f64.powi(e + 1);
            LogBin {
                lo,
                hi,
                count: positives.iter().filter(|&&v| v >= lo && v < hi).count() as u64,
            }
        })
        .collect()
}

/// pop_stats.tsv: `label  n_cells  mean  p25  p50  p75  missing`.
pub fn write_stats_tsv(stats: &[ClusterPopStats], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "label\tn_cells\tmean\tp25\tp50\tp75\tmissing")?;
    for s in stats {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.label, s.n_cells, s.mean, s.p25, s.p50, s.p75, s.missing
        )?;
    }
    Ok(())
}
