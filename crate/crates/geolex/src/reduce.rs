//! Principal-component reduction of the dominance matrix, retaining a
//! configured fraction of total variance.
//!
//! Covariance uses n−1 normalization; components carry a deterministic sign
//! (largest-magnitude entry positive) so refits are bit-identical. The
//! decomposition is single-threaded.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::aggregate::DominanceMatrix;

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("need at least 2 rows to fit, got {0}")]
    TooFewRows(usize),
    #[error("variance fraction must be in (0, 1], got {0}")]
    BadVarianceFraction(f64),
    #[error("data has {got} features, projection expects {want}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Fitted PCA basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Per-feature mean of the fitting data.
    pub mean: Vec<f64>,
    /// Retained components, one row each, orthonormal.
    pub components: Vec<Vec<f64>>,
    /// All eigenvalues of the sample covariance, non-increasing, clamped ≥ 0.
    pub eigenvalues: Vec<f64>,
    pub retained_dim: usize,
    pub variance_fraction: f64,
    /// Share of variance actually captured by the retained components.
    pub retained_share: f64,
    /// Set when the input was degenerate (zero total variance).
    pub degenerate: bool,
}

pub fn pca_fit(m: &DominanceMatrix, variance_fraction: f64) -> Result<Projection, ReduceError> {
    pca_fit_rows(&m.to_rows_f64(), variance_fraction)
}

pub fn pca_fit_rows(rows: &[Vec<f64>], variance_fraction: f64) -> Result<Projection, ReduceError> {
    if rows.len() < 2 {
        return Err(ReduceError::TooFewRows(rows.len()));
    }
    if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
        return Err(ReduceError::BadVarianceFraction(variance_fraction));
    }
    let n = rows.len();
    let d = rows[0].len();

    let mut mean = vec![0.0; d];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut centered = DMatrix::<f64>::zeros(n, d);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            centered[(i, j)] = v - mean[j];
        }
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eigen = SymmetricEigen::new(cov);

    // order eigenpairs by descending eigenvalue; clamp tiny negatives
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&i| eigen.eigenvalues[i].max(0.0))
        .collect();
    let total: f64 = eigenvalues.iter().sum();

    if total <= 0.0 {
        return Ok(Projection {
            mean,
            components: Vec::new(),
            eigenvalues,
            retained_dim: 0,
            variance_fraction,
            retained_share: 0.0,
            degenerate: true,
        });
    }

    let mut retained_dim = 0;
    let mut cumulative = 0.0;
    for &value in &eigenvalues {
        retained_dim += 1;
        cumulative += value;
        if cumulative / total >= variance_fraction {
            break;
        }
    }
    let retained_share = cumulative / total;

    let components: Vec<Vec<f64>> = order[..retained_dim]
        .iter()
        .map(|&i| {
            let col = eigen.eigenvectors.column(i);
            let mut v: Vec<f64> = col.iter().copied().collect();
            // sign convention: largest-magnitude entry positive; first wins ties
            let lead = v
                .iter()
                .enumerate()
                .max_by(|(ai, a), (bi, b)| {
                    a.abs()
                        .partial_cmp(&b.abs())
                        .unwrap()
                        .then(bi.cmp(ai))
                })
                .map(|(_, &x)| x)
                .unwrap_or(0.0);
            if lead < 0.0 {
                for x in &mut v {
                    *x = -*x;
                }
            }
            v
        })
        .collect();

    Ok(Projection {
        mean,
        components,
        eigenvalues,
        retained_dim,
        variance_fraction,
        retained_share,
        degenerate: false,
    })
}

/// Project rows onto the retained components: X = (M − mean)·Cᵀ.
pub fn project(p: &Projection, m: &DominanceMatrix) -> Result<Vec<Vec<f64>>, ReduceError> {
    project_rows(p, &m.to_rows_f64())
}

pub fn project_rows(p: &Projection, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ReduceError> {
    let d = p.mean.len();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() != d {
            return Err(ReduceError::DimensionMismatch {
                want: d,
                got: row.len(),
            });
        }
        let projected: Vec<f64> = p
            .components
            .iter()
            .map(|comp| {
                row.iter()
                    .zip(&p.mean)
                    .zip(comp)
                    .map(|((x, mu), c)| (x - mu) * c)
                    .sum()
            })
            .collect();
        out.push(projected);
    }
    Ok(out)
}

impl Projection {
    pub fn write_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "variance_fraction\t{}", self.variance_fraction)?;
        writeln!(w, "retained_dim\t{}", self.retained_dim)?;
        writeln!(w, "retained_share\t{}", self.retained_share)?;
        writeln!(w, "degenerate\t{}", self.degenerate)?;
        write_row(&mut w, "eigenvalues", &self.eigenvalues)?;
        write_row(&mut w, "mean", &self.mean)?;
        for comp in &self.components {
            write_row(&mut w, "component", comp)?;
        }
        Ok(())
    }

    pub fn read_tsv(reader: impl BufRead) -> Result<Projection, ReduceError> {
        let mut variance_fraction = None;
        let mut retained_dim = None;
        let mut retained_share = 0.0;
        let mut degenerate = false;
        let mut eigenvalues = Vec::new();
        let mut mean = Vec::new();
        let mut components = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let key = fields.next().unwrap();
            let parse_f64s = |fields: std::str::Split<'_, char>| -> Result<Vec<f64>, ReduceError> {
                fields
                    .map(|f| {
                        f.parse::<f64>().map_err(|_| ReduceError::Parse {
                            line: line_no,
                            message: format!("bad number {f:?}"),
                        })
                    })
                    .collect()
            };
            match key {
                "variance_fraction" => {
                    variance_fraction = Some(parse_f64s(fields)?[0]);
                }
                "retained_dim" => {
                    retained_dim = fields.next().and_then(|f| f.parse::<usize>().ok());
                }
                "retained_share" => retained_share = parse_f64s(fields)?[0],
                "degenerate" => degenerate = fields.next() == Some("true"),
                "eigenvalues" => eigenvalues = parse_f64s(fields)?,
                "mean" => mean = parse_f64s(fields)?,
                "component" => components.push(parse_f64s(fields)?),
                other => {
                    return Err(ReduceError::Parse {
                        line: line_no,
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        let retained_dim = retained_dim.ok_or(ReduceError::Parse {
            line: 1,
            message: "missing retained_dim".into(),
        })?;
        if components.len() != retained_dim {
            return Err(ReduceError::Parse {
                line: 1,
                message: format!(
                    "{} component rows but retained_dim {retained_dim}",
                    components.len()
                ),
            });
        }
        Ok(Projection {
            mean,
            components,
            eigenvalues,
            retained_dim,
            variance_fraction: variance_fraction.unwrap_or(0.95),
            retained_share,
            degenerate,
        })
    }
}

fn write_row(w: &mut impl Write, key: &str, values: &[f64]) -> std::io::Result<()> {
    write!(w, "{key}")?;
    for v in values {
        write!(w, "\t{v}")?;
    }
    writeln!(w)
}
