//! Discrete geographic grid: latitude/longitude to cell indices and back.
//!
//! Cells are fixed-size squares in plain equirectangular coordinates (no
//! projection). The default cell size is 25 arc-minutes. Note: the grid is
//! configurable down to arc-second sizes, but 25′ is the default unit of
//! analysis; at 25″ a global grid would have ~2 billion cells.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("cell size must be in (0, 3600] arc-minutes, got {0}")]
    InvalidCellSize(f64),
    #[error("coordinates out of range: lat {lat}, lon {lon}")]
    OutOfRange { lat: f64, lon: f64 },
    #[error("cell ({0}) does not exist in this grid")]
    InvalidCell(CellId),
    #[error("malformed cell id {0:?}, expected ix_iy")]
    MalformedCellId(String),
}

/// Grid resolution in arc-minutes per cell side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    cell_size_arcmin: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            cell_size_arcmin: 25.0,
        }
    }
}

impl GridSpec {
    pub fn new(cell_size_arcmin: f64) -> Result<Self, GridError> {
        if !(cell_size_arcmin > 0.0 && cell_size_arcmin <= 3600.0) {
            return Err(GridError::InvalidCellSize(cell_size_arcmin));
        }
        Ok(GridSpec { cell_size_arcmin })
    }

    pub fn cell_size_arcmin(&self) -> f64 {
        self.cell_size_arcmin
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_size_arcmin / 60.0
    }

    /// Number of columns; ceiling so a non-divisor cell size still covers the globe.
    pub fn n_cols(&self) -> u64 {
        (360.0 * 60.0 / self.cell_size_arcmin).ceil() as u64
    }

    pub fn n_rows(&self) -> u64 {
        (180.0 * 60.0 / self.cell_size_arcmin).ceil() as u64
    }

    /// Cell containing the point. `lat` 90 and `lon` 180 clamp to the last row/column.
    pub fn cell_of(&self, lat: f64, lon: f64) -> Result<CellId, GridError> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(GridError::OutOfRange { lat, lon });
        }
        let ix = ((lon + 180.0) * 60.0 / self.cell_size_arcmin).floor() as u64;
        let iy = ((lat + 90.0) * 60.0 / self.cell_size_arcmin).floor() as u64;
        Ok(CellId {
            ix: ix.min(self.n_cols() - 1),
            iy: iy.min(self.n_rows() - 1),
        })
    }

    /// Center of the cell: lower corner plus half a cell on each axis.
    pub fn cell_center(&self, cell: CellId) -> Result<(f64, f64), GridError> {
        if cell.ix >= self.n_cols() || cell.iy >= self.n_rows() {
            return Err(GridError::InvalidCell(cell));
        }
        let lat = -90.0 + (cell.iy as f64 + 0.5) * self.cell_size_arcmin / 60.0;
        let lon = -180.0 + (cell.ix as f64 + 0.5) * self.cell_size_arcmin / 60.0;
        Ok((lat, lon))
    }
}

/// Grid cell, identified by column (`ix`, west→east) and row (`iy`, south→north).
///
/// Ordering is row-major by `(iy, ix)` — the canonical row order of every
/// serialized artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub ix: u64,
    pub iy: u64,
}

impl PartialOrd for CellId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CellId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.iy, self.ix).cmp(&(other.iy, other.ix))
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.ix, self.iy)
    }
}

impl FromStr for CellId {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ix, iy) = s
            .split_once('_')
            .ok_or_else(|| GridError::MalformedCellId(s.to_string()))?;
        let parse = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| GridError::MalformedCellId(s.to_string()))
        };
        Ok(CellId {
            ix: parse(ix)?,
            iy: parse(iy)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact floor((v + offset) * 60 / arcmin) with v given as a decimal string,
    /// evaluated in integer arithmetic. Independent of the f64 path above.
    fn rational_floor_index(decimal: &str, offset: i128, arcmin: i128) -> i128 {
        let (int_part, frac_part) = match decimal.split_once('.') {
            Some((i, f)) => (i, f),
            None => (decimal, ""),
        };
        let neg = int_part.starts_with('-');
        let digits: String = int_part.trim_start_matches('-').chars().chain(frac_part.chars()).collect();
        let scale = 10i128.pow(frac_part.len() as u32);
        let mut num: i128 = digits.parse().unwrap();
        if neg {
            num = -num;
        }
        // (num/scale + offset) * 60 / arcmin = (num + offset*scale) * 60 / (arcmin*scale)
        (num + offset * scale) * 60 / (arcmin * scale)
    }

    #[test]
    fn origin_corner_maps_to_cell_zero() {
        let grid = GridSpec::default();
        assert_eq!(grid.cell_of(-90.0, -180.0).unwrap(), CellId { ix: 0, iy: 0 });
    }

    #[test]
    fn null_island_matches_rational_oracle() {
        let grid = GridSpec::default();
        let cell = grid.cell_of(0.0, 0.0).unwrap();
        assert_eq!(cell.ix as i128, rational_floor_index("0", 180, 25));
        assert_eq!(cell.iy as i128, rational_floor_index("0", 90, 25));
        assert_eq!(cell, CellId { ix: 432, iy: 216 });
    }

    #[test]
    fn madrid_matches_rational_oracle() {
        let grid = GridSpec::default();
        let cell = grid.cell_of(40.4168, -3.7038).unwrap();
        assert_eq!(cell.ix as i128, rational_floor_index("-3.7038", 180, 25));
        assert_eq!(cell.iy as i128, rational_floor_index("40.4168", 90, 25));
        assert_eq!(cell, CellId { ix: 423, iy: 313 });
    }

    #[test]
    fn poles_and_antimeridian_clamp_to_last_cells() {
        let grid = GridSpec::default();
        let c = grid.cell_of(90.0, 180.0).unwrap();
        assert_eq!(c.ix, grid.n_cols() - 1);
        assert_eq!(c.iy, grid.n_rows() - 1);
    }

    #[test]
    fn out_of_range_coordinates_rejected() {
        let grid = GridSpec::default();
        assert!(matches!(grid.cell_of(95.0, 0.0), Err(GridError::OutOfRange { .. })));
        assert!(matches!(grid.cell_of(0.0, -180.5), Err(GridError::OutOfRange { .. })));
    }

    #[test]
    fn cell_center_matches_exact_arithmetic() {
        let grid = GridSpec::default();
        // -90 + 25/120 and -180 + 25/120
        let (lat, lon) = grid.cell_center(CellId { ix: 0, iy: 0 }).unwrap();
        assert!((lat - (-90.0 + 25.0 / 120.0)).abs() < 1e-12);
        assert!((lon - (-180.0 + 25.0 / 120.0)).abs() < 1e-12);
        let (lat, lon) = grid.cell_center(CellId { ix: 432, iy: 216 }).unwrap();
        assert!((lat - 25.0 / 120.0).abs() < 1e-12);
        assert!((lon - 25.0 / 120.0).abs() < 1e-12);
    }

    #[test]
    fn center_round_trips_for_sampled_cells() {
        for &arcmin in &[25.0, 7.0, 60.0, 0.4166] {
            let grid = GridSpec::new(arcmin).unwrap();
            let (nc, nr) = (grid.n_cols(), grid.n_rows());
            for &ix in &[0, 1, nc / 3, nc / 2, nc - 1] {
                for &iy in &[0, 1, nr / 3, nr / 2, nr - 1] {
                    let cell = CellId { ix, iy };
                    let (lat, lon) = grid.cell_center(cell).unwrap();
                    assert_eq!(grid.cell_of(lat, lon).unwrap(), cell, "arcmin {arcmin}");
                }
            }
        }
    }

    #[test]
    fn nearby_points_in_cell_interior_share_cell() {
        let grid = GridSpec::default();
        let cell = grid.cell_of(40.4168, -3.7038).unwrap();
        let (lat, lon) = grid.cell_center(cell).unwrap();
        let eps = grid.cell_size_deg() / 2.0 * 0.99;
        for (dlat, dlon) in [(eps, 0.0), (-eps, 0.0), (0.0, eps), (0.0, -eps)] {
            assert_eq!(grid.cell_of(lat + dlat, lon + dlon).unwrap(), cell);
        }
    }

    #[test]
    fn invalid_cell_rejected_by_center() {
        let grid = GridSpec::default();
        let bad = CellId { ix: grid.n_cols(), iy: 0 };
        assert_eq!(grid.cell_center(bad), Err(GridError::InvalidCell(bad)));
    }

    #[test]
    fn cell_id_string_round_trip() {
        let id = CellId { ix: 423, iy: 313 };
        assert_eq!(id.to_string(), "423_313");
        assert_eq!("423_313".parse::<CellId>().unwrap(), id);
        assert!("423-313".parse::<CellId>().is_err());
    }

    #[test]
    fn ordering_is_row_major() {
        let mut cells = vec![
            CellId { ix: 5, iy: 1 },
            CellId { ix: 0, iy: 2 },
            CellId { ix: 9, iy: 0 },
        ];
        cells.sort();
        assert_eq!(cells[0], CellId { ix: 9, iy: 0 });
        assert_eq!(cells[1], CellId { ix: 5, iy: 1 });
        assert_eq!(cells[2], CellId { ix: 0, iy: 2 });
    }

    #[test]
    fn rejects_degenerate_cell_sizes() {
        assert!(GridSpec::new(0.0).is_err());
        assert!(GridSpec::new(-5.0).is_err());
        assert!(GridSpec::new(3601.0).is_err());
        assert!(GridSpec::new(3600.0).is_ok());
    }
}
