//! Lexical dialect mapping from geolocated text records.
//!
//! The pipeline: load a concept/variant lexicon, match variants in geolocated
//! records, aggregate occurrence counts per grid cell, derive the dominant
//! variant of each concept per cell, build the binary cell×feature dominance
//! matrix, reduce it with PCA, cluster cells with k-means (cluster count
//! chosen by the f(K) distortion-ratio metric), and export dominance and
//! cluster maps. A synthetic-corpus lab plants known dialect regions so the
//! whole chain can be validated against ground truth.

pub mod aggregate;
pub mod cartography;
pub mod cluster;
pub mod geogrid;
pub mod ingest;
pub mod lexicon;
pub mod population;
pub mod reduce;
pub mod synthlab;

pub use aggregate::{CountsTable, DominanceMatrix, FeatureSpace};
pub use cartography::{CircleMark, MapDoc, Palette};
pub use cluster::{ClusterConfig, ClusterModel, FCurve, KMeansConfig, KMeansResult};
pub use geogrid::{CellId, GridSpec};
pub use ingest::{Filters, IngestReport, Record};
pub use lexicon::{Concept, Hit, Lexicon, LoadReport, Matcher, NormalizationConfig, Variant};
pub use population::Raster;
pub use reduce::Projection;
pub use synthlab::{SynthSpec, TruthTable};
