//! Mergeable occurrence counts, per-cell dominant variants, and the binary
//! cell×feature dominance matrix.
//!
//! `CountsTable` is a monoid under `merge_counts`, which is what makes
//! sharded ingestion sound: merging before or after any aggregation step
//! yields identical results.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::ops::Range;
use std::sync::Arc;

use thiserror::Error;

use crate::geogrid::{CellId, GridSpec};
use crate::lexicon::{Lexicon, Matcher};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("grids differ: {0} vs {1} arc-minutes")]
    GridMismatch(f64, f64),
    #[error("counts built against different lexicons")]
    LexiconMismatch,
    #[error("counts table is empty")]
    EmptyCounts,
    #[error("unknown concept {0}")]
    UnknownConcept(String),
    #[error("unknown feature {0}:{1}")]
    UnknownFeature(String, String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Ordered feature columns: (concept_id, variant_id) pairs, lexicographic.
/// Column order is shared by hits, counts, and the dominance matrix.
#[derive(Debug)]
pub struct FeatureSpace {
    features: Vec<(String, String)>,
    /// Concept ids with their column ranges, in column order.
    blocks: Vec<(String, Range<usize>)>,
    lexicon_digest: [u8; 32],
}

impl FeatureSpace {
    pub fn from_lexicon(lexicon: &Lexicon) -> Arc<FeatureSpace> {
        let mut features: Vec<(String, String)> = lexicon
            .concepts
            .iter()
            .flat_map(|c| {
                c.variants
                    .iter()
                    .map(|v| (c.concept_id.clone(), v.variant_id.clone()))
            })
            .collect();
        features.sort();
        Arc::new(Self::from_parts(features, lexicon.digest()))
    }

    pub fn from_matcher(matcher: &Matcher) -> Arc<FeatureSpace> {
        Arc::new(Self::from_parts(
            matcher.features().to_vec(),
            matcher.lexicon_digest(),
        ))
    }

    /// Rebuild from `concept:variant` column labels (matrix headers). The
    /// digest is unknown in this path and set to zero.
    pub fn from_labels(labels: &[String]) -> Result<Arc<FeatureSpace>, AggregateError> {
        let mut features = Vec::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            let (c, v) = label.split_once(':').ok_or_else(|| AggregateError::Parse {
                line: 1,
                message: format!("column {i}: label {label:?} is not concept:variant"),
            })?;
            features.push((c.to_string(), v.to_string()));
        }
        if !features.windows(2).all(|w| w[0] < w[1]) {
            return Err(AggregateError::Parse {
                line: 1,
                message: "feature columns not in sorted order".into(),
            });
        }
        Ok(Arc::new(Self::from_parts(features, [0u8; 32])))
    }

    fn from_parts(features: Vec<(String, String)>, lexicon_digest: [u8; 32]) -> FeatureSpace {
        let mut blocks: Vec<(String, Range<usize>)> = Vec::new();
        for (i, (concept, _)) in features.iter().enumerate() {
            match blocks.last_mut() {
                Some((c, range)) if c == concept => range.end = i + 1,
                _ => blocks.push((concept.clone(), i..i + 1)),
            }
        }
        FeatureSpace {
            features,
            blocks,
            lexicon_digest,
        }
    }

    pub fn features(&self) -> &[(String, String)] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn label(&self, feature: u32) -> String {
        let (c, v) = &self.features[feature as usize];
        format!("{c}:{v}")
    }

    pub fn concept_blocks(&self) -> &[(String, Range<usize>)] {
        &self.blocks
    }

    pub fn concept_block(&self, concept_id: &str) -> Option<&Range<usize>> {
        self.blocks
            .iter()
            .find(|(c, _)| c == concept_id)
            .map(|(_, r)| r)
    }

    pub fn feature_index(&self, concept_id: &str, variant_id: &str) -> Option<u32> {
        self.features
            .binary_search_by(|(c, v)| {
                (c.as_str(), v.as_str()).cmp(&(concept_id, variant_id))
            })
            .ok()
            .map(|i| i as u32)
    }

    pub fn lexicon_digest(&self) -> [u8; 32] {
        self.lexicon_digest
    }
}

/// Dominant variant of one concept in one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dominance {
    pub feature: u32,
    pub count: u64,
    pub tied: bool,
}

/// (cell, concept, variant) → occurrence count. Mergeable.
#[derive(Debug, Clone)]
pub struct CountsTable {
    grid: GridSpec,
    space: Arc<FeatureSpace>,
    entries: HashMap<(CellId, u32), u64>,
}

impl CountsTable {
    pub fn new(grid: GridSpec, space: Arc<FeatureSpace>) -> CountsTable {
        CountsTable {
            grid,
            space,
            entries: HashMap::new(),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    pub fn increment(&mut self, cell: CellId, feature: u32, by: u64) {
        debug_assert!((feature as usize) < self.space.len());
        if by > 0 {
            *self.entries.entry((cell, feature)).or_insert(0) += by;
        }
    }

    pub fn count(&self, cell: CellId, feature: u32) -> u64 {
        self.entries.get(&(cell, feature)).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of all counts (equals total hits for an ingested table).
    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn distinct_cells(&self) -> BTreeSet<CellId> {
        self.entries.keys().map(|(cell, _)| *cell).collect()
    }

    pub fn cell_totals(&self) -> HashMap<CellId, u64> {
        let mut totals = HashMap::new();
        for ((cell, _), count) in &self.entries {
            *totals.entry(*cell).or_insert(0) += count;
        }
        totals
    }

    /// Pointwise sum; requires the same grid and lexicon.
    pub fn merge(&mut self, other: CountsTable) -> Result<(), AggregateError> {
        if self.grid.cell_size_arcmin() != other.grid.cell_size_arcmin() {
            return Err(AggregateError::GridMismatch(
                self.grid.cell_size_arcmin(),
                other.grid.cell_size_arcmin(),
            ));
        }
        if self.space.lexicon_digest() != other.space.lexicon_digest() {
            return Err(AggregateError::LexiconMismatch);
        }
        for (key, count) in other.entries {
            *self.entries.entry(key).or_insert(0) += count;
        }
        Ok(())
    }

    /// Dominant variant for `(cell, concept)`: maximal count, ties broken by
    /// lexicographically smallest variant id and flagged. None if unobserved.
    pub fn dominant(&self, cell: CellId, concept_id: &str) -> Option<Dominance> {
        let block = self.space.concept_block(concept_id)?;
        let mut best: Option<Dominance> = None;
        for feature in block.clone() {
            let count = self.count(cell, feature as u32);
            if count == 0 {
                continue;
            }
            best = Some(match best {
                // block is sorted by variant id, so strictly-greater keeps the
                // earliest (smallest) variant on ties
                Some(b) if count > b.count => Dominance {
                    feature: feature as u32,
                    count,
                    tied: false,
                },
                Some(b) => Dominance {
                    tied: b.tied || count == b.count,
                    ..b
                },
                None => Dominance {
                    feature: feature as u32,
                    count,
                    tied: false,
                },
            });
        }
        best
    }

    /// Entries sorted by (cell row order, feature column order).
    pub fn iter_sorted(&self) -> Vec<(CellId, u32, u64)> {
        let mut rows: Vec<(CellId, u32, u64)> = self
            .entries
            .iter()
            .map(|(&(cell, feature), &count)| (cell, feature, count))
            .collect();
        rows.sort_by_key(|&(cell, feature, _)| (cell, feature));
        rows
    }

    pub fn write_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "cell\tconcept\tvariant\tcount")?;
        for (cell, feature, count) in self.iter_sorted() {
            let (concept, variant) = &self.space.features()[feature as usize];
            writeln!(w, "{cell}\t{concept}\t{variant}\t{count}")?;
        }
        Ok(())
    }

    pub fn read_tsv(
        reader: impl BufRead,
        grid: GridSpec,
        space: Arc<FeatureSpace>,
    ) -> Result<CountsTable, AggregateError> {
        let mut table = CountsTable::new(grid, space);
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if idx == 0 {
                if line != "cell\tconcept\tvariant\tcount" {
                    return Err(AggregateError::Parse {
                        line: line_no,
                        message: "bad counts header".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(AggregateError::Parse {
                    line: line_no,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let cell: CellId = fields[0].parse().map_err(|e| AggregateError::Parse {
                line: line_no,
                message: format!("{e}"),
            })?;
            let feature = table
                .space
                .feature_index(fields[1], fields[2])
                .ok_or_else(|| {
                    AggregateError::UnknownFeature(fields[1].into(), fields[2].into())
                })?;
            let count: u64 = fields[3].parse().map_err(|_| AggregateError::Parse {
                line: line_no,
                message: format!("bad count {:?}", fields[3]),
            })?;
            if count == 0 {
                return Err(AggregateError::Parse {
                    line: line_no,
                    message: "zero count not allowed".into(),
                });
            }
            table.increment(cell, feature, count);
        }
        Ok(table)
    }
}

/// Pointwise sum of two tables built against the same grid and lexicon.
pub fn merge_counts(mut a: CountsTable, b: CountsTable) -> Result<CountsTable, AggregateError> {
    a.merge(b)?;
    Ok(a)
}

/// Binary cell×feature matrix: entry 1 iff the feature is its concept's
/// dominant variant in that cell. Rows sorted by (iy, ix), columns
/// lexicographic by (concept_id, variant_id).
#[derive(Debug, Clone)]
pub struct DominanceMatrix {
    cells: Vec<CellId>,
    space: Arc<FeatureSpace>,
    rows: Vec<Vec<u8>>,
}

impl PartialEq for DominanceMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells
            && self.space.features() == other.space.features()
            && self.rows == other.rows
    }
}

impl DominanceMatrix {
    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn n_features(&self) -> usize {
        self.space.len()
    }

    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    pub fn get(&self, row: usize, feature: usize) -> bool {
        self.rows[row][feature] != 0
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.rows[row]
    }

    pub fn to_rows_f64(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&b| b as f64).collect())
            .collect()
    }

    /// Restriction to a subset of rows (used by hierarchical subclustering).
    pub fn select_rows(&self, indices: &[usize]) -> DominanceMatrix {
        DominanceMatrix {
            cells: indices.iter().map(|&i| self.cells[i]).collect(),
            space: Arc::clone(&self.space),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn write_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        let labels: Vec<String> = (0..self.space.len())
            .map(|i| self.space.label(i as u32))
            .collect();
        writeln!(w, "cell\t{}", labels.join("\t"))?;
        for (cell, row) in self.cells.iter().zip(&self.rows) {
            write!(w, "{cell}")?;
            for &bit in row {
                write!(w, "\t{bit}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_tsv(reader: impl BufRead) -> Result<DominanceMatrix, AggregateError> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or(AggregateError::Parse {
            line: 1,
            message: "empty matrix file".into(),
        })??;
        let mut columns = header.split('\t');
        if columns.next() != Some("cell") {
            return Err(AggregateError::Parse {
                line: 1,
                message: "first header column must be 'cell'".into(),
            });
        }
        let labels: Vec<String> = columns.map(str::to_string).collect();
        let space = FeatureSpace::from_labels(&labels)?;

        let mut cells = Vec::new();
        let mut rows: Vec<Vec<u8>> = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let cell: CellId = fields
                .next()
                .unwrap()
                .parse()
                .map_err(|e| AggregateError::Parse {
                    line: line_no,
                    message: format!("{e}"),
                })?;
            let row: Vec<u8> = fields
                .map(|f| match f {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(AggregateError::Parse {
                        line: line_no,
                        message: format!("matrix entry {other:?} not 0/1"),
                    }),
                })
                .collect::<Result<_, _>>()?;
            if row.len() != space.len() {
                return Err(AggregateError::Parse {
                    line: line_no,
                    message: format!("row width {} != {} features", row.len(), space.len()),
                });
            }
            cells.push(cell);
            rows.push(row);
        }
        if !cells.windows(2).all(|w| w[0] < w[1]) {
            return Err(AggregateError::Parse {
                line: 1,
                message: "rows not sorted by cell".into(),
            });
        }
        Ok(DominanceMatrix { cells, space, rows })
    }
}

/// Build the dominance matrix: one row per cell observing at least
/// `min_concepts` concepts; within each concept block the dominant variant's
/// column is 1, unobserved concepts stay all-zero.
pub fn build_matrix(
    counts: &CountsTable,
    min_concepts: usize,
) -> Result<DominanceMatrix, AggregateError> {
    if counts.is_empty() {
        return Err(AggregateError::EmptyCounts);
    }
    let space = Arc::clone(counts.space());
    let min_concepts = min_concepts.max(1);

    // features observed per cell, in sorted order
    let mut per_cell: BTreeMap<CellId, Vec<u32>> = BTreeMap::new();
    for (cell, feature, _) in counts.iter_sorted() {
        per_cell.entry(cell).or_default().push(feature);
    }

    let mut cells = Vec::new();
    let mut rows = Vec::new();
    for (cell, observed) in per_cell {
        let mut concepts: Vec<&str> = observed
            .iter()
            .map(|&f| space.features()[f as usize].0.as_str())
            .collect();
        concepts.dedup();
        if concepts.len() < min_concepts {
            continue;
        }
        let mut row = vec![0u8; space.len()];
        for concept_id in concepts {
            let dom = counts
                .dominant(cell, concept_id)
                .expect("observed concept has a dominant variant");
            row[dom.feature as usize] = 1;
        }
        cells.push(cell);
        rows.push(row);
    }
    Ok(DominanceMatrix { cells, space, rows })
}
