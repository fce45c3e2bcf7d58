//! Shared domain types.
//!
//! Everything here is immutable after construction and `Send + Sync`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index components in canonical order.
pub const COMPONENTS: [&str; 4] = ["percpov", "percvac", "unemp", "nohs"];

/// 12-digit block-group identifier: state 2 + county 3 + tract 6 + block group 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Geoid(String);

impl Geoid {
    pub const LEN: usize = 12;

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() == Self::LEN && s.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Geoid(s.to_owned()))
        } else {
            Err(Error::InvalidInput(format!("bad GEOID `{s}`")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn state_fips(&self) -> &str {
        &self.0[..2]
    }

    pub fn county_fips(&self) -> &str {
        &self.0[..5]
    }
}

impl TryFrom<String> for Geoid {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Geoid::parse(&s)
    }
}

impl From<Geoid> for String {
    fn from(g: Geoid) -> String {
        g.0
    }
}

impl fmt::Display for Geoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// States outside the lower 48 + DC: Alaska, Hawaii and the territories.
pub fn is_contiguous_state(state_fips: &str) -> bool {
    match state_fips.parse::<u32>() {
        Ok(2) | Ok(15) => false,
        Ok(code) => code < 60,
        Err(_) => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockGroupRecord {
    pub geoid: Geoid,
    pub state_fips: String,
    /// `None` when the block group lies in no Census place.
    pub place_id: Option<String>,
    pub percpov: f64,
    pub percvac: f64,
    pub unemp: f64,
    pub nohs: f64,
    pub population: u64,
    pub popdens: Option<f64>,
    pub percblk: Option<f64>,
    pub percwht: Option<f64>,
}

impl BlockGroupRecord {
    /// The four index components in [`COMPONENTS`] order.
    pub fn components(&self) -> [f64; 4] {
        [self.percpov, self.percvac, self.unemp, self.nohs]
    }

    /// Zero-population records are scored but never used to estimate weights.
    pub fn zero_pop(&self) -> bool {
        self.population == 0
    }
}

/// Closed ring of (longitude, latitude) pairs.
pub type Ring = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Ring,
    pub interiors: Vec<Ring>,
}

impl Polygon {
    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.interiors.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub geoid: Geoid,
    pub polygons: Vec<Polygon>,
}

impl Geometry {
    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        self.polygons.iter().flat_map(|p| p.rings())
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64; 2]> {
        self.rings().flat_map(|r| r.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightScheme {
    InverseSD,
    PCA,
    Explicit,
}

/// Index weights in [`COMPONENTS`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: [f64; 4],
    pub scheme: WeightScheme,
    pub source_sds: Option<[f64; 4]>,
}

impl WeightVector {
    pub fn explicit(w: [f64; 4]) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "weights must be finite and non-negative: {w:?}"
            )));
        }
        Ok(WeightVector {
            w,
            scheme: WeightScheme::Explicit,
            source_sds: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredBlockGroup {
    pub geoid: Geoid,
    pub raw_score: f64,
    pub score: f64,
    pub high_deprivation: bool,
}

/// Undirected contiguity graph. Nodes are sorted by GEOID; each edge is
/// stored once as `(a, b)` with `a < b`, and the edge list is sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdjacencyGraph {
    nodes: Vec<Geoid>,
    edges: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl AdjacencyGraph {
    /// Builds the graph from node geoids (must be sorted and unique) and an
    /// arbitrary edge list. Self-edges and duplicates are dropped.
    pub fn from_edges(nodes: Vec<Geoid>, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        let mut edges: Vec<(u32, u32)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        Self::from_sorted_edges(nodes, edges)
    }

    pub(crate) fn from_sorted_edges(nodes: Vec<Geoid>, edges: Vec<(u32, u32)>) -> Self {
        let n = nodes.len();
        let mut degree = vec![0usize; n + 1];
        for &(a, b) in &edges {
            degree[a as usize + 1] += 1;
            degree[b as usize + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0u32; edges.len() * 2];
        for &(a, b) in &edges {
            neighbors[cursor[a as usize]] = b;
            cursor[a as usize] += 1;
            neighbors[cursor[b as usize]] = a;
            cursor[b as usize] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        AdjacencyGraph {
            nodes,
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn nodes(&self) -> &[Geoid] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, geoid: &Geoid) -> Option<usize> {
        self.nodes.binary_search(geoid).ok()
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&(b as u32)).is_ok()
    }

    /// Edge list as geoid pairs, `a < b`, sorted.
    pub fn geoid_pairs(&self) -> impl Iterator<Item = (&Geoid, &Geoid)> {
        self.edges
            .iter()
            .map(|&(a, b)| (&self.nodes[a as usize], &self.nodes[b as usize]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    Place,
    State,
    CustomCity,
}

impl RegionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionKind::Place => "Place",
            RegionKind::State => "State",
            RegionKind::CustomCity => "CustomCity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Place" => Some(RegionKind::Place),
            "State" => Some(RegionKind::State),
            "CustomCity" => Some(RegionKind::CustomCity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub region_id: String,
    pub region_kind: RegionKind,
    pub n_bg: usize,
    pub median_score: f64,
    /// Percent of members classified high-deprivation (%HD).
    pub pct_high: f64,
    pub dispersion: Option<f64>,
    pub percpov: Option<f64>,
    pub popdens: Option<f64>,
    pub percblk: Option<f64>,
    pub percwht: Option<f64>,
    pub population: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    OLS,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub model: ModelKind,
    pub names: Vec<String>,
    /// Intercept first.
    pub coef: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    pub p_values: Vec<f64>,
    /// R² for OLS, McFadden pseudo-R² for logistic.
    pub r2: f64,
    pub adj_r2: Option<f64>,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}
