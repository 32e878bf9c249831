//! K-means clustering of cells in reduced space, with the cluster count
//! chosen automatically from the f(K) distortion-ratio metric, plus
//! hierarchical subclustering of any resulting cluster.
//!
//! All randomness flows from one seed through per-restart derived streams, so
//! a fixed (input, seed, config) yields an identical model no matter how the
//! work is scheduled.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aggregate::DominanceMatrix;
use crate::geogrid::CellId;
use crate::reduce::{self, Projection, ReduceError};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error("k must be at least 1")]
    KZero,
    #[error("k = {k} exceeds the {rows} available rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("{rows} rows is fewer than k_max = {k_max}; lower --kmax or add data")]
    TooFewRows { rows: usize, k_max: usize },
    #[error("no cluster labeled {0:?}")]
    UnknownLabel(String),
    #[error("matrix rows do not match the model's cells")]
    MatrixMismatch,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub n_init: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            n_init: 10,
            max_iter: 300,
        }
    }
}

/// Result of the best restart.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances of rows to their assigned centroid.
    pub distortion: f64,
    pub seed: u64,
    pub iterations: usize,
}

fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// splitmix64-style stream derivation from the master seed.
fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// D²-weighted (k-means++) center choice.
fn seed_centroids(x: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    centers.push(x[first].clone());
    let mut dist2: Vec<f64> = x.iter().map(|p| distance_sq(p, &x[first])).collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let idx = if total > 0.0 {
            let r = rng.gen::<f64>() * total;
            let mut cumulative = 0.0;
            let mut pick = None;
            for (i, &w) in dist2.iter().enumerate() {
                cumulative += w;
                if cumulative > r {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| {
                dist2.iter().rposition(|&w| w > 0.0).unwrap_or(n - 1)
            })
        } else {
            // all points coincide with chosen centers
            rng.gen_range(0..n)
        };
        centers.push(x[idx].clone());
        for (d, p) in dist2.iter_mut().zip(x) {
            *d = d.min(distance_sq(p, &x[idx]));
        }
    }
    centers
}

/// Nearest centroid per point. Ties keep the current assignment when it is
/// among the minima (prevents oscillation after empty-cluster repair),
/// otherwise the smallest centroid index wins.
fn assign(x: &[Vec<f64>], centroids: &[Vec<f64>], current: Option<&[usize]>) -> Vec<usize> {
    x.iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (j, c) in centroids.iter().enumerate() {
                let d = distance_sq(p, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            if let Some(cur) = current {
                if distance_sq(p, &centroids[cur[i]]) == best_d {
                    return cur[i];
                }
            }
            best
        })
        .collect()
}

fn update_centroids(x: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in x.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            for s in sum.iter_mut() {
                *s /= count as f64;
            }
        }
    }
    sums
}

/// Give every empty cluster the point farthest from its own centroid, taken
/// from a cluster with more than one member.
fn repair_empty(
    x: &[Vec<f64>],
    assignments: &mut [usize],
    centroids: &mut [Vec<f64>],
    k: usize,
    dim: usize,
) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            break;
        };
        let mut donor: Option<(usize, f64)> = None;
        for (i, p) in x.iter().enumerate() {
            if sizes[assignments[i]] <= 1 {
                continue;
            }
            let d = distance_sq(p, &centroids[assignments[i]]);
            let better = match donor {
                Some((_, best)) => d > best,
                None => true,
            };
            if better {
                donor = Some((i, d));
            }
        }
        let Some((point, _)) = donor else { break };
        assignments[point] = empty;
        let refreshed = update_centroids(x, assignments, k, dim);
        *centroids = refreshed;
    }
}

fn lloyd_run(x: &[Vec<f64>], k: usize, cfg: &KMeansConfig, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<Vec<f64>>, usize) {
    let dim = x.first().map_or(0, Vec::len);
    let mut centroids = seed_centroids(x, k, rng);
    let mut assignments = assign(x, &centroids, None);
    centroids = update_centroids(x, &assignments, k, dim);
    repair_empty(x, &mut assignments, &mut centroids, k, dim);
    let mut iterations = 1;
    while iterations < cfg.max_iter {
        let next = assign(x, &centroids, Some(&assignments));
        if next == assignments {
            break;
        }
        assignments = next;
        centroids = update_centroids(x, &assignments, k, dim);
        repair_empty(x, &mut assignments, &mut centroids, k, dim);
        iterations += 1;
    }
    (assignments, centroids, iterations)
}

/// Best-of-`n_init` Lloyd runs with D²-weighted seeding. The lowest-distortion
/// restart wins; ties keep the earliest restart.
pub fn kmeans(
    x: &[Vec<f64>],
    k: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<KMeansResult, ClusterError> {
    if k == 0 {
        return Err(ClusterError::KZero);
    }
    if k > x.len() {
        return Err(ClusterError::KTooLarge { k, rows: x.len() });
    }
    let mut best: Option<KMeansResult> = None;
    for restart in 0..cfg.n_init.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, restart as u64));
        let (assignments, centroids, iterations) = lloyd_run(x, k, cfg, &mut rng);
        let distortion: f64 = x
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| distance_sq(p, &centroids[a]))
            .sum();
        let replace = match &best {
            Some(b) => distortion < b.distortion,
            None => true,
        };
        if replace {
            best = Some(KMeansResult {
                k,
                centroids,
                assignments,
                distortion,
                seed,
                iterations,
            });
        }
    }
    Ok(best.expect("n_init >= 1"))
}

/// One point of the f(K) selection curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FPoint {
    pub k: usize,
    pub distortion: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FCurve {
    pub points: Vec<FPoint>,
    /// Dimensionality the weight sequence α_K was computed for.
    pub n_d: usize,
}

impl FCurve {
    pub fn write_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "K\tS_K\tf_K")?;
        for p in &self.points {
            writeln!(w, "{}\t{}\t{}", p.k, p.distortion, p.f)?;
        }
        Ok(())
    }
}

fn f_curve_from_distortions(distortions: &[f64], n_d: usize) -> FCurve {
    let alpha = alpha_weights(distortions.len(), n_d);
    let mut points = Vec::with_capacity(distortions.len());
    for (i, &s_k) in distortions.iter().enumerate() {
        let k = i + 1;
        let f = if k == 1 || distortions[i - 1] == 0.0 {
            1.0
        } else {
            s_k / (alpha[i] * distortions[i - 1])
        };
        points.push(FPoint {
            k,
            distortion: s_k,
            f,
        });
    }
    FCurve { points, n_d }
}

/// α_2 = 1 − 3/(4·N_d); α_K = α_{K−1} + (1 − α_{K−1})/6 for K > 2.
fn alpha_weights(k_max: usize, n_d: usize) -> Vec<f64> {
    let mut alpha = vec![1.0; k_max];
    if k_max >= 2 {
        alpha[1] = if n_d == 0 {
            1.0
        } else {
            1.0 - 3.0 / (4.0 * n_d as f64)
        };
        for k in 2..k_max {
            alpha[k] = alpha[k - 1] + (1.0 - alpha[k - 1]) / 6.0;
        }
    }
    alpha
}

fn kmeans_sweep(
    x: &[Vec<f64>],
    k_max: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<Vec<KMeansResult>, ClusterError> {
    (1..=k_max).map(|k| kmeans(x, k, seed, cfg)).collect()
}

/// Evaluate f(K) for K = 1..k_max; each S_K comes from a full kmeans run.
pub fn pham_f_curve(
    x: &[Vec<f64>],
    k_max: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<FCurve, ClusterError> {
    let results = kmeans_sweep(x, k_max, seed, cfg)?;
    let distortions: Vec<f64> = results.iter().map(|r| r.distortion).collect();
    Ok(f_curve_from_distortions(
        &distortions,
        x.first().map_or(0, Vec::len),
    ))
}

/// The K minimizing f(K) among those below `threshold`; 1 if none qualify;
/// ties go to the smaller K.
pub fn select_k(curve: &FCurve, threshold: f64) -> usize {
    let mut chosen = 1;
    let mut best = f64::INFINITY;
    for p in &curve.points {
        if p.f < threshold && p.f < best {
            best = p.f;
            chosen = p.k;
        }
    }
    chosen
}

/// Pipeline configuration for `cluster_cells` and `subcluster`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub variance_fraction: f64,
    pub k_max: usize,
    pub threshold: f64,
    pub seed: u64,
    pub n_init: usize,
    pub max_iter: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            variance_fraction: 0.95,
            k_max: 10,
            threshold: 0.85,
            seed: 0,
            n_init: 10,
            max_iter: 300,
        }
    }
}

impl ClusterConfig {
    fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            n_init: self.n_init,
            max_iter: self.max_iter,
        }
    }
}

/// Link from a sub-model to the parent cluster it refines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentLink {
    pub model_id: String,
    pub cluster_index: usize,
    pub label: String,
}

const GREEK: [&str; 24] = [
    "α", "β", "γ", "δ", "ε", "ζ", "η", "θ", "ι", "κ", "λ", "μ", "ν", "ξ", "ο", "π", "ρ", "σ",
    "τ", "υ", "φ", "χ", "ψ", "ω",
];

pub fn greek_label(i: usize) -> String {
    GREEK
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("c{i}"))
}

/// A fitted dialect clustering: PCA projection, f-curve, chosen K, labeled
/// assignments, and an optional link to the parent cluster it subdivides.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub result: KMeansResult,
    pub f_curve: FCurve,
    pub chosen_k: usize,
    /// Label per cluster index; α has the greatest observation volume.
    pub labels: Vec<String>,
    pub parent: Option<ParentLink>,
    pub cells: Vec<CellId>,
    pub projection: Projection,
    pub model_id: String,
}

/// Sidecar metadata persisted next to clusters.tsv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_id: String,
    pub seed: u64,
    pub chosen_k: usize,
    pub retained_dim: usize,
    pub variance_fraction: f64,
    pub retained_share: f64,
    pub labels: Vec<String>,
    pub parent: Option<ParentLink>,
}

/// Cluster membership without the fitted numerics — the shape that
/// clusters.tsv round-trips.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignments {
    pub cells: Vec<CellId>,
    pub assignments: Vec<usize>,
    /// Label per cluster index.
    pub labels: Vec<String>,
    pub parent_label: Option<String>,
}

impl ClusterModel {
    pub fn meta(&self) -> ModelMeta {
        ModelMeta {
            model_id: self.model_id.clone(),
            seed: self.result.seed,
            chosen_k: self.chosen_k,
            retained_dim: self.projection.retained_dim,
            variance_fraction: self.projection.variance_fraction,
            retained_share: self.projection.retained_share,
            labels: self.labels.clone(),
            parent: self.parent.clone(),
        }
    }

    pub fn to_assignments(&self) -> ClusterAssignments {
        ClusterAssignments {
            cells: self.cells.clone(),
            assignments: self.result.assignments.clone(),
            labels: self.labels.clone(),
            parent_label: self.parent.as_ref().map(|p| p.label.clone()),
        }
    }

    pub fn label_of_cell(&self, row: usize) -> &str {
        &self.labels[self.result.assignments[row]]
    }

    pub fn cluster_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Row indices belonging to the labeled cluster.
    pub fn member_rows(&self, label: &str) -> Option<Vec<usize>> {
        let idx = self.cluster_index(label)?;
        Some(
            self.result
                .assignments
                .iter()
                .enumerate()
                .filter(|(_, &a)| a == idx)
                .map(|(i, _)| i)
                .collect(),
        )
    }
}

impl ClusterAssignments {
    pub fn write_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "cell\tcluster_index\tlabel\tparent_label")?;
        let parent = self.parent_label.as_deref().unwrap_or("");
        for (cell, &a) in self.cells.iter().zip(&self.assignments) {
            writeln!(w, "{cell}\t{a}\t{}\t{parent}", self.labels[a])?;
        }
        Ok(())
    }

    pub fn read_tsv(reader: impl BufRead) -> Result<ClusterAssignments, ClusterError> {
        let mut cells = Vec::new();
        let mut assignments = Vec::new();
        let mut labels: Vec<String> = Vec::new();
        let mut parent_label: Option<String> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if idx == 0 {
                if line != "cell\tcluster_index\tlabel\tparent_label" {
                    return Err(ClusterError::Parse {
                        line: line_no,
                        message: "bad clusters header".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(ClusterError::Parse {
                    line: line_no,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let cell: CellId = fields[0].parse().map_err(|e| ClusterError::Parse {
                line: line_no,
                message: format!("{e}"),
            })?;
            let index: usize = fields[1].parse().map_err(|_| ClusterError::Parse {
                line: line_no,
                message: format!("bad cluster index {:?}", fields[1]),
            })?;
            if labels.len() <= index {
                labels.resize(index + 1, String::new());
            }
            labels[index] = fields[2].to_string();
            if !fields[3].is_empty() {
                parent_label = Some(fields[3].to_string());
            }
            cells.push(cell);
            assignments.push(index);
        }
        Ok(ClusterAssignments {
            cells,
            assignments,
            labels,
            parent_label,
        })
    }

    pub fn member_cells(&self, label: &str) -> Vec<CellId> {
        let Some(idx) = self.labels.iter().position(|l| l == label) else {
            return Vec::new();
        };
        self.cells
            .iter()
            .zip(&self.assignments)
            .filter(|(_, &a)| a == idx)
            .map(|(c, _)| *c)
            .collect()
    }
}

fn model_id(cells: &[CellId], assignments: &[usize], seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for (cell, &a) in cells.iter().zip(assignments) {
        hasher.update(cell.ix.to_le_bytes());
        hasher.update(cell.iy.to_le_bytes());
        hasher.update((a as u64).to_le_bytes());
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Order clusters by total observation volume (descending; ties by earliest
/// member row) and hand out labels α, β, … in that order.
fn volume_labels(
    k: usize,
    assignments: &[usize],
    cells: &[CellId],
    cell_totals: &HashMap<CellId, u64>,
) -> Vec<String> {
    let mut volume = vec![0u64; k];
    let mut first_row = vec![usize::MAX; k];
    for (row, (&a, cell)) in assignments.iter().zip(cells).enumerate() {
        volume[a] += cell_totals.get(cell).copied().unwrap_or(0);
        first_row[a] = first_row[a].min(row);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(volume[c]), first_row[c]));
    let mut labels = vec![String::new(); k];
    for (rank, &cluster) in order.iter().enumerate() {
        labels[cluster] = greek_label(rank);
    }
    labels
}

/// Full pipeline on a dominance matrix: PCA → projection → f-curve → K
/// selection → k-means at the chosen K, with volume-ordered labels.
pub fn cluster_cells(
    m: &DominanceMatrix,
    cell_totals: &HashMap<CellId, u64>,
    config: &ClusterConfig,
) -> Result<ClusterModel, ClusterError> {
    let rows = m.n_rows();
    if rows < config.k_max {
        return Err(ClusterError::TooFewRows {
            rows,
            k_max: config.k_max,
        });
    }
    let projection = reduce::pca_fit(m, config.variance_fraction)?;
    let x = reduce::project(&projection, m)?;
    let results = kmeans_sweep(&x, config.k_max, config.seed, &config.kmeans())?;
    let distortions: Vec<f64> = results.iter().map(|r| r.distortion).collect();
    let f_curve = f_curve_from_distortions(&distortions, projection.retained_dim);
    let chosen_k = select_k(&f_curve, config.threshold);
    let result = results
        .into_iter()
        .nth(chosen_k - 1)
        .expect("chosen_k within sweep");
    let labels = volume_labels(chosen_k, &result.assignments, m.cells(), cell_totals);
    let id = model_id(m.cells(), &result.assignments, config.seed);
    Ok(ClusterModel {
        result,
        f_curve,
        chosen_k,
        labels,
        parent: None,
        cells: m.cells().to_vec(),
        projection,
        model_id: id,
    })
}

/// Re-run the full pipeline on the cells of one parent cluster. `m` must be
/// the matrix the parent model was fitted on.
pub fn subcluster(
    parent: &ClusterModel,
    label: &str,
    m: &DominanceMatrix,
    cell_totals: &HashMap<CellId, u64>,
    config: &ClusterConfig,
) -> Result<ClusterModel, ClusterError> {
    if parent.cells != m.cells() {
        return Err(ClusterError::MatrixMismatch);
    }
    let cluster_index = parent
        .cluster_index(label)
        .ok_or_else(|| ClusterError::UnknownLabel(label.to_string()))?;
    let rows = parent.member_rows(label).expect("label resolved");
    if rows.len() < config.k_max {
        return Err(ClusterError::TooFewRows {
            rows: rows.len(),
            k_max: config.k_max,
        });
    }
    let sub = m.select_rows(&rows);
    let mut model = cluster_cells(&sub, cell_totals, config)?;
    model.parent = Some(ParentLink {
        model_id: parent.model_id.clone(),
        cluster_index,
        label: label.to_string(),
    });
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{build_matrix, CountsTable, FeatureSpace};
    use crate::geogrid::GridSpec;
    use crate::lexicon::{Lexicon, LoadOptions};

    /// Exhaustive-partition optimum: try every assignment of n points to k
    /// clusters (all clusters non-empty), centroid = mean.
    fn brute_force_distortion(x: &[Vec<f64>], k: usize) -> f64 {
        let n = x.len();
        let dim = x[0].len();
        let mut best = f64::INFINITY;
        let total = (k as u64).pow(n as u32);
        'outer: for code in 0..total {
            let mut assignment = vec![0usize; n];
            let mut c = code;
            for a in assignment.iter_mut() {
                *a = (c % k as u64) as usize;
                c /= k as u64;
            }
            let mut seen = vec![false; k];
            for &a in &assignment {
                seen[a] = true;
            }
            if seen.iter().any(|&s| !s) {
                continue 'outer;
            }
            let centroids = update_centroids(x, &assignment, k, dim);
            let d: f64 = x
                .iter()
                .zip(&assignment)
                .map(|(p, &a)| distance_sq(p, &centroids[a]))
                .sum();
            if d < best {
                best = d;
            }
        }
        best
    }

    fn quadruple() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![10.0, 0.0],
            vec![10.0, 1.0],
        ]
    }

    #[test]
    fn kmeans_matches_brute_force_on_quadruple() {
        let x = quadruple();
        let r = kmeans(&x, 2, 42, &KMeansConfig::default()).unwrap();
        assert_eq!(r.distortion, brute_force_distortion(&x, 2));
        assert!((r.distortion - 1.0).abs() < 1e-12);
        let mut centroids = r.centroids.clone();
        centroids.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(centroids, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
    }

    #[test]
    fn k_one_is_mean_and_total_deviation() {
        let x = quadruple();
        let r = kmeans(&x, 1, 1, &KMeansConfig::default()).unwrap();
        assert_eq!(r.centroids, vec![vec![5.0, 0.5]]);
        assert!((r.distortion - 101.0).abs() < 1e-12);
    }

    #[test]
    fn k_equals_rows_gives_zero_distortion() {
        let x = quadruple();
        let r = kmeans(&x, 4, 7, &KMeansConfig::default()).unwrap();
        assert_eq!(r.distortion, 0.0);
        let mut sorted = r.assignments.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, [0, 1, 2, 3]);
    }

    #[test]
    fn kmeans_rejects_bad_k() {
        let x = quadruple();
        assert!(matches!(
            kmeans(&x, 0, 0, &KMeansConfig::default()),
            Err(ClusterError::KZero)
        ));
        assert!(matches!(
            kmeans(&x, 5, 0, &KMeansConfig::default()),
            Err(ClusterError::KTooLarge { .. })
        ));
    }

    #[test]
    fn repair_keeps_every_cluster_non_empty() {
        let mut x = vec![vec![0.0, 0.0]; 5];
        x.push(vec![1.0, 1.0]);
        for seed in 0..10 {
            let r = kmeans(&x, 3, seed, &KMeansConfig::default()).unwrap();
            let mut sizes = vec![0usize; 3];
            for &a in &r.assignments {
                sizes[a] += 1;
            }
            assert!(sizes.iter().all(|&s| s > 0), "seed {seed}: {sizes:?}");
        }
    }

    #[test]
    fn f_of_one_is_always_one() {
        let x = quadruple();
        let curve = pham_f_curve(&x, 3, 5, &KMeansConfig::default()).unwrap();
        assert_eq!(curve.points[0].f, 1.0);
    }

    #[test]
    fn f_curve_matches_hand_arithmetic_on_quadruple() {
        let x = quadruple();
        let curve = pham_f_curve(&x, 2, 3, &KMeansConfig::default()).unwrap();
        // N_d = 2 → α_2 = 0.625; S_1 = 101, S_2 = 1
        assert!((curve.points[0].distortion - 101.0).abs() < 1e-12);
        assert!((curve.points[1].distortion - 1.0).abs() < 1e-12);
        let expected = 1.0 / (0.625 * 101.0);
        assert!((curve.points[1].f - expected).abs() < 1e-12);
        assert!((curve.points[1].f - 0.01584).abs() < 1e-5);
    }

    #[test]
    fn identical_rows_give_flat_f_curve() {
        let x = vec![vec![2.0, 3.0]; 6];
        let curve = pham_f_curve(&x, 4, 9, &KMeansConfig::default()).unwrap();
        for p in &curve.points {
            assert_eq!(p.f, 1.0);
            assert_eq!(p.distortion, 0.0);
        }
    }

    #[test]
    fn select_k_picks_minimum_below_threshold() {
        let x = quadruple();
        let curve = pham_f_curve(&x, 4, 11, &KMeansConfig::default()).unwrap();
        assert_eq!(select_k(&curve, 0.85), 2);
    }

    #[test]
    fn select_k_defaults_to_one_and_breaks_ties_low() {
        let flat = FCurve {
            points: vec![
                FPoint { k: 1, distortion: 5.0, f: 1.0 },
                FPoint { k: 2, distortion: 4.0, f: 0.9 },
            ],
            n_d: 2,
        };
        assert_eq!(select_k(&flat, 0.85), 1);
        let tied = FCurve {
            points: vec![
                FPoint { k: 1, distortion: 5.0, f: 1.0 },
                FPoint { k: 2, distortion: 2.0, f: 0.5 },
                FPoint { k: 3, distortion: 1.0, f: 0.5 },
            ],
            n_d: 2,
        };
        assert_eq!(select_k(&tied, 0.85), 2);
    }

    #[test]
    fn f_curve_invariant_under_translation_and_scaling() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let center = if i % 2 == 0 { 0.0 } else { 8.0 };
                vec![center + rng.gen::<f64>(), center + rng.gen::<f64>()]
            })
            .collect();
        let base = pham_f_curve(&x, 4, 77, &KMeansConfig::default()).unwrap();

        let shifted: Vec<Vec<f64>> = x
            .iter()
            .map(|p| p.iter().map(|v| v + 13.25).collect())
            .collect();
        let shift_curve = pham_f_curve(&shifted, 4, 77, &KMeansConfig::default()).unwrap();

        let scaled: Vec<Vec<f64>> = x
            .iter()
            .map(|p| p.iter().map(|v| v * 3.0).collect())
            .collect();
        let scale_curve = pham_f_curve(&scaled, 4, 77, &KMeansConfig::default()).unwrap();

        for k in 0..4 {
            assert!(
                (base.points[k].f - shift_curve.points[k].f).abs() < 1e-6,
                "translation changed f at K={}",
                k + 1
            );
            assert!(
                (base.points[k].f - scale_curve.points[k].f).abs() < 1e-6,
                "scaling changed f at K={}",
                k + 1
            );
            assert!(
                (scale_curve.points[k].distortion - 9.0 * base.points[k].distortion).abs()
                    <= 1e-6 * base.points[k].distortion.max(1e-12),
                "distortion should scale by c² at K={}",
                k + 1
            );
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let x = quadruple();
        let a = kmeans(&x, 2, 99, &KMeansConfig::default()).unwrap();
        let b = kmeans(&x, 2, 99, &KMeansConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn partition_is_stable_under_row_permutation() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x: Vec<Vec<f64>> = Vec::new();
        for c in 0..3 {
            for _ in 0..8 {
                x.push(vec![
                    10.0 * c as f64 + rng.gen::<f64>(),
                    10.0 * c as f64 + rng.gen::<f64>(),
                ]);
            }
        }
        let canonical = |assignments: &[usize], perm: &[usize]| -> Vec<Vec<usize>> {
            let k = assignments.iter().max().unwrap() + 1;
            let mut groups = vec![Vec::new(); k];
            for (row, &a) in assignments.iter().enumerate() {
                groups[a].push(perm[row]);
            }
            for g in &mut groups {
                g.sort_unstable();
            }
            groups.sort();
            groups
        };
        let ident: Vec<usize> = (0..x.len()).collect();
        let base = kmeans(&x, 3, 4, &KMeansConfig::default()).unwrap();
        let base_groups = canonical(&base.assignments, &ident);

        let perm: Vec<usize> = (0..x.len()).rev().collect();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let other = kmeans(&permuted, 3, 4, &KMeansConfig::default()).unwrap();
        assert_eq!(canonical(&other.assignments, &perm), base_groups);
    }

    fn two_block_matrix() -> (crate::aggregate::DominanceMatrix, HashMap<CellId, u64>) {
        let input = "\
concept\tC182\tcold
variant\tgripa
variant\tgripe
concept\tF125\tmiss
variant\techar de menos
variant\textrañar
";
        let (lexicon, _) = Lexicon::from_reader(input.as_bytes(), &LoadOptions::default()).unwrap();
        let space = FeatureSpace::from_lexicon(&lexicon);
        let mut counts = CountsTable::new(GridSpec::default(), Arc::clone(&space));
        let gripa = space.feature_index("C182", "gripa").unwrap();
        let gripe = space.feature_index("C182", "gripe").unwrap();
        let echar = space.feature_index("F125", "echar-de-menos").unwrap();
        let extranar = space.feature_index("F125", "extrañar").unwrap();
        // 12 cells in the gripa/echar block (high volume), 12 in gripe/extrañar
        for i in 0..12u64 {
            counts.increment(CellId { ix: i, iy: 0 }, gripa, 10);
            counts.increment(CellId { ix: i, iy: 0 }, echar, 10);
            counts.increment(CellId { ix: i, iy: 5 }, gripe, 2);
            counts.increment(CellId { ix: i, iy: 5 }, extranar, 2);
        }
        let m = build_matrix(&counts, 1).unwrap();
        (m, counts.cell_totals())
    }

    #[test]
    fn cluster_cells_finds_two_blocks_and_orders_labels_by_volume() {
        let (m, totals) = two_block_matrix();
        let config = ClusterConfig {
            k_max: 6,
            seed: 3,
            ..Default::default()
        };
        let model = cluster_cells(&m, &totals, &config).unwrap();
        assert_eq!(model.chosen_k, 2);
        // all iy=0 cells share a label, all iy=5 cells the other
        let label_of = |iy: u64| {
            let row = model.cells.iter().position(|c| c.iy == iy).unwrap();
            model.label_of_cell(row).to_string()
        };
        let high = label_of(0);
        let low = label_of(5);
        assert_eq!(high, "α");
        assert_eq!(low, "β");
        for (row, cell) in model.cells.iter().enumerate() {
            let expect = if cell.iy == 0 { &high } else { &low };
            assert_eq!(model.label_of_cell(row), expect);
        }
    }

    #[test]
    fn identical_cells_collapse_to_one_cluster() {
        let input = "\
concept\tC182\tcold
variant\tgripa
variant\tgripe
";
        let (lexicon, _) = Lexicon::from_reader(input.as_bytes(), &LoadOptions::default()).unwrap();
        let space = FeatureSpace::from_lexicon(&lexicon);
        let mut counts = CountsTable::new(GridSpec::default(), Arc::clone(&space));
        for i in 0..8u64 {
            counts.increment(CellId { ix: i, iy: 0 }, 0, 3);
        }
        let m = build_matrix(&counts, 1).unwrap();
        let config = ClusterConfig {
            k_max: 4,
            seed: 0,
            ..Default::default()
        };
        let model = cluster_cells(&m, &counts.cell_totals(), &config).unwrap();
        assert_eq!(model.chosen_k, 1);
        assert!(model.projection.degenerate);
    }

    #[test]
    fn cluster_cells_requires_enough_rows() {
        let (m, totals) = two_block_matrix();
        let config = ClusterConfig {
            k_max: 200,
            ..Default::default()
        };
        assert!(matches!(
            cluster_cells(&m, &totals, &config),
            Err(ClusterError::TooFewRows { .. })
        ));
    }

    #[test]
    fn subcluster_restricts_to_parent_cluster() {
        let (m, totals) = two_block_matrix();
        let config = ClusterConfig {
            k_max: 6,
            seed: 3,
            ..Default::default()
        };
        let parent = cluster_cells(&m, &totals, &config).unwrap();
        let sub_config = ClusterConfig {
            k_max: 3,
            seed: 3,
            ..Default::default()
        };
        let sub = subcluster(&parent, "β", &m, &totals, &sub_config).unwrap();
        let beta_cells: Vec<CellId> = parent
            .member_rows("β")
            .unwrap()
            .into_iter()
            .map(|r| parent.cells[r])
            .collect();
        assert_eq!(sub.cells, beta_cells);
        assert_eq!(sub.parent.as_ref().unwrap().label, "β");
        assert_eq!(sub.parent.as_ref().unwrap().model_id, parent.model_id);
    }

    #[test]
    fn subcluster_rejects_unknown_label_and_tiny_clusters() {
        let (m, totals) = two_block_matrix();
        let config = ClusterConfig {
            k_max: 6,
            seed: 3,
            ..Default::default()
        };
        let parent = cluster_cells(&m, &totals, &config).unwrap();
        assert!(matches!(
            subcluster(&parent, "ω", &m, &totals, &config),
            Err(ClusterError::UnknownLabel(_))
        ));
        let big = ClusterConfig {
            k_max: 100,
            ..config
        };
        assert!(matches!(
            subcluster(&parent, "β", &m, &totals, &big),
            Err(ClusterError::TooFewRows { .. })
        ));
    }

    #[test]
    fn clusters_tsv_round_trips() {
        let (m, totals) = two_block_matrix();
        let config = ClusterConfig {
            k_max: 6,
            seed: 3,
            ..Default::default()
        };
        let model = cluster_cells(&m, &totals, &config).unwrap();
        let assignments = model.to_assignments();
        let mut buf = Vec::new();
        assignments.write_tsv(&mut buf).unwrap();
        let back = ClusterAssignments::read_tsv(&buf[..]).unwrap();
        assert_eq!(back, assignments);
    }

    #[test]
    fn fcurve_tsv_has_expected_shape() {
        let x = quadruple();
        let curve = pham_f_curve(&x, 3, 2, &KMeansConfig::default()).unwrap();
        let mut buf = Vec::new();
        curve.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "K\tS_K\tf_K");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1\t"));
    }
}
