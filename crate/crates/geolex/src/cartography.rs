//! Map export: per-concept dominance maps and cluster maps as GeoJSON and
//! SVG circle charts.
//!
//! Circles sit at cell centers in plain equirectangular coordinates. On
//! concept maps the circle area is proportional to the dominant variant's
//! count; cluster maps use a fixed radius. No basemap is drawn.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Serialize;
use thiserror::Error;

use crate::aggregate::CountsTable;
use crate::cluster::ClusterAssignments;
use crate::geogrid::GridSpec;

#[derive(Debug, Error)]
pub enum CartographyError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("concept {0} not present in counts")]
    UnknownConcept(String),
    #[error("palette line {line}: expected key<TAB>color")]
    BadPaletteLine { line: usize },
}

/// Categorical colors (ColorBrewer-style), cycled when keys run out.
const DEFAULT_COLORS: [&str; 16] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#999999",
    "#66c2a5", "#fc8d62", "#8da0cb", "#e78ac3", "#a6d854", "#ffd92f", "#e5c494", "#b3b3b3",
];

/// Superdialect colors: α red, β blue.
const ROOT_CLUSTER_COLORS: [&str; 2] = ["#e41a1c", "#377eb8"];
/// Regional-dialect colors: blue, orange, green, yellow.
const SUB_CLUSTER_COLORS: [&str; 4] = ["#377eb8", "#ff7f00", "#4daf4a", "#ffd92f"];

/// Deterministic key→color assignment with optional per-key overrides.
#[derive(Debug, Clone, Default)]
pub struct Palette {
    overrides: BTreeMap<String, String>,
    preferred: Vec<String>,
}

impl Palette {
    pub fn for_variants() -> Palette {
        Palette::default()
    }

    pub fn for_clusters(is_subcluster: bool) -> Palette {
        let preferred = if is_subcluster {
            SUB_CLUSTER_COLORS.iter().map(|s| s.to_string()).collect()
        } else {
            ROOT_CLUSTER_COLORS.iter().map(|s| s.to_string()).collect()
        };
        Palette {
            overrides: BTreeMap::new(),
            preferred,
        }
    }

    pub fn with_overrides(mut self, overrides: BTreeMap<String, String>) -> Palette {
        self.overrides = overrides;
        self
    }

    /// Parse a `key<TAB>color` override file.
    pub fn read_overrides(reader: impl BufRead) -> Result<BTreeMap<String, String>, CartographyError> {
        let mut map = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (key, color) = line
                .split_once('\t')
                .ok_or(CartographyError::BadPaletteLine { line: idx + 1 })?;
            map.insert(key.to_string(), color.to_string());
        }
        Ok(map)
    }

    fn color(&self, rank: usize, key: &str) -> String {
        if let Some(c) = self.overrides.get(key) {
            return c.clone();
        }
        if rank < self.preferred.len() {
            return self.preferred[rank].clone();
        }
        let i = (rank - self.preferred.len()) % DEFAULT_COLORS.len();
        DEFAULT_COLORS[i].to_string()
    }
}

/// One circle on a map.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMark {
    pub cell: String,
    pub lat: f64,
    pub lon: f64,
    pub radius: f64,
    /// Color key: variant id or cluster label.
    pub key: String,
    pub count: u64,
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendEntry {
    pub key: String,
    pub label: String,
    pub color: String,
}

/// A renderable circle map: marks sorted by cell, legend keyed by color key.
#[derive(Debug, Clone, PartialEq)]
pub struct MapDoc {
    pub title: String,
    pub marks: Vec<CircleMark>,
    pub legend: Vec<LegendEntry>,
}

impl MapDoc {
    fn color_of(&self, key: &str) -> &str {
        self.legend
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.color.as_str())
            .unwrap_or("#000000")
    }
}

/// Dominance map for one concept: a circle per observing cell, colored by the
/// dominant variant, area proportional to that variant's count.
pub fn concept_map(
    counts: &CountsTable,
    concept_id: &str,
    scale: f64,
    palette: &Palette,
) -> Result<MapDoc, CartographyError> {
    let space = counts.space();
    if space.concept_block(concept_id).is_none() {
        return Err(CartographyError::UnknownConcept(concept_id.to_string()));
    }
    let grid = counts.grid();
    // radius = sqrt(area/π) with area = scale·count, factored so integer count
    // ratios give exact radius ratios
    let base = (scale / std::f64::consts::PI).sqrt();

    let mut marks = Vec::new();
    let mut variants_present: BTreeMap<String, ()> = BTreeMap::new();
    let mut seen_concept = false;
    for cell in counts.distinct_cells() {
        let Some(dom) = counts.dominant(cell, concept_id) else {
            continue;
        };
        seen_concept = true;
        let (_, variant_id) = &space.features()[dom.feature as usize];
        variants_present.insert(variant_id.clone(), ());
        let (lat, lon) = grid.cell_center(cell).expect("cell from counts");
        marks.push(CircleMark {
            cell: cell.to_string(),
            lat,
            lon,
            radius: base * (dom.count as f64).sqrt(),
            key: variant_id.clone(),
            count: dom.count,
            tied: dom.tied,
        });
    }
    if !seen_concept {
        return Err(CartographyError::UnknownConcept(concept_id.to_string()));
    }
    let legend = variants_present
        .keys()
        .enumerate()
        .map(|(rank, key)| LegendEntry {
            key: key.clone(),
            label: key.clone(),
            color: palette.color(rank, key),
        })
        .collect();
    Ok(MapDoc {
        title: format!("concept {concept_id}"),
        marks,
        legend,
    })
}

/// Cluster map: one fixed-radius circle per cell, colored by cluster label.
pub fn cluster_map(assignments: &ClusterAssignments, grid: GridSpec, palette: &Palette) -> MapDoc {
    let radius = grid.cell_size_deg() / 2.0;
    let marks = assignments
        .cells
        .iter()
        .zip(&assignments.assignments)
        .map(|(cell, &a)| {
            let (lat, lon) = grid.cell_center(*cell).expect("cell from model");
            CircleMark {
                cell: cell.to_string(),
                lat,
                lon,
                radius,
                key: assignments.labels[a].clone(),
                count: 1,
                tied: false,
            }
        })
        .collect();
    // legend in label order (α, β, …), which is the palette rank order
    let legend = assignments
        .labels
        .iter()
        .enumerate()
        .map(|(rank, label)| LegendEntry {
            key: label.clone(),
            label: label.clone(),
            color: palette.color(rank, label),
        })
        .collect();
    let title = match &assignments.parent_label {
        Some(parent) => format!("subclusters of {parent}"),
        None => "clusters".to_string(),
    };
    MapDoc {
        title,
        marks,
        legend,
    }
}

#[derive(Serialize)]
struct GeoFeatureCollection<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    title: &'a str,
    legend: Vec<GeoLegend<'a>>,
    features: Vec<GeoFeature<'a>>,
}

#[derive(Serialize)]
struct GeoLegend<'a> {
    key: &'a str,
    label: &'a str,
    color: &'a str,
}

#[derive(Serialize)]
struct GeoFeature<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    geometry: GeoPoint,
    properties: GeoProps<'a>,
}

#[derive(Serialize)]
struct GeoPoint {
    #[serde(rename = "type")]
    kind: &'static str,
    /// [lon, lat] per RFC 7946.
    coordinates: [f64; 2],
}

#[derive(Serialize)]
struct GeoProps<'a> {
    cell: &'a str,
    key: &'a str,
    count: u64,
    radius: f64,
    color: &'a str,
    tie: bool,
}

/// RFC 7946 FeatureCollection, byte-deterministic for a given doc.
pub fn emit_geojson(doc: &MapDoc) -> Vec<u8> {
    let collection = GeoFeatureCollection {
        kind: "FeatureCollection",
        title: &doc.title,
        legend: doc
            .legend
            .iter()
            .map(|e| GeoLegend {
                key: &e.key,
                label: &e.label,
                color: &e.color,
            })
            .collect(),
        features: doc
            .marks
            .iter()
            .map(|m| GeoFeature {
                kind: "Feature",
                geometry: GeoPoint {
                    kind: "Point",
                    coordinates: [m.lon, m.lat],
                },
                properties: GeoProps {
                    cell: &m.cell,
                    key: &m.key,
                    count: m.count,
                    radius: m.radius,
                    color: doc.color_of(&m.key),
                    tie: m.tied,
                },
            })
            .collect(),
    };
    let mut bytes = serde_json::to_vec(&collection).expect("serializable");
    bytes.push(b'\n');
    bytes
}

/// SVG 1.1 circle chart in equirectangular placement (x = lon, y = −lat).
pub fn emit_svg(doc: &MapDoc) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-180 -90 360 180\" \
         width=\"1440\" height=\"720\">\n",
    );
    out.push_str(&format!("<title>{}</title>\n", xml_escape(&doc.title)));
    out.push_str("<g id=\"marks\">\n");
    for m in &doc.marks {
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\" fill-opacity=\"0.7\"><title>{} {} ({})</title></circle>\n",
            m.lon,
            -m.lat,
            m.radius,
            doc.color_of(&m.key),
            xml_escape(&m.cell),
            xml_escape(&m.key),
            m.count,
        ));
    }
    out.push_str("</g>\n<g id=\"legend\">\n");
    for (i, e) in doc.legend.iter().enumerate() {
        let y = -86.0 + 5.0 * i as f64;
        out.push_str(&format!(
            "<rect x=\"-178\" y=\"{}\" width=\"3\" height=\"3\" fill=\"{}\"/>\n",
            y, e.color
        ));
        out.push_str(&format!(
            "<text x=\"-174\" y=\"{}\" font-size=\"3\">{}</text>\n",
            y + 2.6,
            xml_escape(&e.label)
        ));
    }
    out.push_str("</g>\n</svg>\n");
    out.into_bytes()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
