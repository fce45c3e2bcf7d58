//! Polygon contiguity and the dispersion score.
//!
//! Contiguity is decided on snapped vertices: every coordinate is rounded
//! to an integer grid of `precision` degrees, and two block groups touch
//! when they share a snapped vertex (queen) or a snapped boundary segment
//! (rook). Shared keys are found by sorting `(key, node)` pairs, so the
//! work is O(V log V) in the vertex count rather than all-pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{AdjacencyGraph, Geoid, Geometry, ScoredBlockGroup};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapGrid {
    precision: f64,
}

impl Default for SnapGrid {
    fn default() -> Self {
        SnapGrid { precision: 1e-7 }
    }
}

impl SnapGrid {
    pub fn new(precision: f64) -> Result<Self> {
        if precision > 0.0 && precision.is_finite() {
            Ok(SnapGrid { precision })
        } else {
            Err(Error::InvalidInput(format!("snap precision must be > 0, got {precision}")))
        }
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }

    pub fn key(&self, p: &[f64; 2]) -> (i64, i64) {
        (
            (p[0] / self.precision).round() as i64,
            (p[1] / self.precision).round() as i64,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contiguity {
    /// Any shared boundary point, corners included.
    #[default]
    Queen,
    /// A shared boundary segment.
    Rook,
}

impl FromStr for Contiguity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "queen" => Ok(Contiguity::Queen),
            "rook" => Ok(Contiguity::Rook),
            _ => Err(Error::InvalidInput(format!("unknown contiguity `{s}`"))),
        }
    }
}

type Point = (i64, i64);
type Segment = (Point, Point);

fn vertex_keys(g: &Geometry, snap: &SnapGrid) -> Vec<Point> {
    let mut keys: Vec<Point> = g.vertices().map(|p| snap.key(p)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

fn segment_keys(g: &Geometry, snap: &SnapGrid) -> Vec<Segment> {
    let mut keys: Vec<Segment> = g
        .rings()
        .flat_map(|ring| {
            ring.windows(2).filter_map(|w| {
                let (a, b) = (snap.key(&w[0]), snap.key(&w[1]));
                match a.cmp(&b) {
                    std::cmp::Ordering::Less => Some((a, b)),
                    std::cmp::Ordering::Greater => Some((b, a)),
                    std::cmp::Ordering::Equal => None,
                }
            })
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

fn edges_from_shared_keys<K>(exec: Execution, per_node: Vec<Vec<K>>) -> Vec<(u32, u32)>
where
    K: Ord + Copy + Send,
{
    let total = per_node.iter().map(Vec::len).sum();
    let mut entries: Vec<(K, u32)> = Vec::with_capacity(total);
    for (node, keys) in per_node.into_iter().enumerate() {
        entries.extend(keys.into_iter().map(|k| (k, node as u32)));
    }
    exec.sort_unstable(&mut entries);

    let mut edges = Vec::new();
    let mut start = 0;
    while start < entries.len() {
        let mut end = start + 1;
        while end < entries.len() && entries[end].0 == entries[start].0 {
            end += 1;
        }
        let group = &entries[start..end];
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                if a.1 != b.1 {
                    edges.push((a.1.min(b.1), a.1.max(b.1)));
                }
            }
        }
        start = end;
    }
    exec.sort_unstable(&mut edges);
    edges.dedup();
    edges
}

/// Contiguity graph over the given geometries (nodes in geoid order).
pub fn build_adjacency(
    geometries: &BTreeMap<Geoid, Geometry>,
    snap: SnapGrid,
    contiguity: Contiguity,
    exec: Execution,
) -> AdjacencyGraph {
    let nodes: Vec<Geoid> = geometries.keys().cloned().collect();
    let geoms: Vec<&Geometry> = geometries.values().collect();
    exec.install(|| {
        let edges = match contiguity {
            Contiguity::Queen => {
                edges_from_shared_keys(exec, exec.map(&geoms, |g| vertex_keys(g, &snap)))
            }
            Contiguity::Rook => {
                edges_from_shared_keys(exec, exec.map(&geoms, |g| segment_keys(g, &snap)))
            }
        };
        AdjacencyGraph::from_sorted_edges(nodes, edges)
    })
}

/// All-pairs reference for [`build_adjacency`]; intended for small inputs.
pub fn adjacency_oracle(
    geometries: &BTreeMap<Geoid, Geometry>,
    snap: SnapGrid,
    contiguity: Contiguity,
) -> AdjacencyGraph {
    let nodes: Vec<Geoid> = geometries.keys().cloned().collect();
    let geoms: Vec<&Geometry> = geometries.values().collect();
    let mut edges = Vec::new();
    match contiguity {
        Contiguity::Queen => {
            let sets: Vec<BTreeSet<Point>> = geoms
                .iter()
                .map(|g| g.vertices().map(|p| snap.key(p)).collect())
                .collect();
            for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    if sets[i].intersection(&sets[j]).next().is_some() {
                        edges.push((i as u32, j as u32));
                    }
                }
            }
        }
        Contiguity::Rook => {
            let sets: Vec<BTreeSet<Segment>> = geoms
                .iter()
                .map(|g| segment_keys(g, &snap).into_iter().collect())
                .collect();
            for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    if sets[i].intersection(&sets[j]).next().is_some() {
                        edges.push((i as u32, j as u32));
                    }
                }
            }
        }
    }
    AdjacencyGraph::from_edges(nodes, edges)
}

/// Whose high-deprivation neighbours count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NeighborScope {
    /// Any block group in the dataset.
    #[default]
    Dataset,
    WithinCity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DispersionFlag {
    AllHigh,
    NoHigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub value: f64,
    pub flag: Option<DispersionFlag>,
    /// Low-deprivation members.
    pub n_low: usize,
    /// Low-deprivation members without a high-deprivation neighbour.
    pub isolated_low: usize,
}

/// `1 − isolated_low / n_low` over a city's members (graph node indices).
/// `high` is indexed by graph node.
pub fn dispersion(
    members: &[usize],
    high: &[bool],
    graph: &AdjacencyGraph,
    scope: NeighborScope,
) -> Result<Dispersion> {
    if members.is_empty() {
        return Err(Error::EmptyRegion("dispersion of an empty city".into()));
    }
    let n_low = members.iter().filter(|&&m| !high[m]).count();
    if n_low == 0 {
        return Ok(Dispersion {
            value: 1.0,
            flag: Some(DispersionFlag::AllHigh),
            n_low,
            isolated_low: 0,
        });
    }
    if n_low == members.len() {
        return Ok(Dispersion {
            value: 0.0,
            flag: Some(DispersionFlag::NoHigh),
            n_low,
            isolated_low: n_low,
        });
    }
    let in_city: Option<BTreeSet<usize>> = match scope {
        NeighborScope::Dataset => None,
        NeighborScope::WithinCity => Some(members.iter().copied().collect()),
    };
    let isolated_low = members
        .iter()
        .filter(|&&m| !high[m])
        .filter(|&&m| {
            !graph.neighbors(m).iter().any(|&nb| {
                let nb = nb as usize;
                high[nb] && in_city.as_ref().is_none_or(|c| c.contains(&nb))
            })
        })
        .count();
    Ok(Dispersion {
        value: 1.0 - isolated_low as f64 / n_low as f64,
        flag: None,
        n_low,
        isolated_low,
    })
}

/// High-deprivation flag per graph node; nodes without a score are low.
pub fn node_high_flags(graph: &AdjacencyGraph, scored: &[ScoredBlockGroup]) -> Vec<bool> {
    graph
        .nodes()
        .iter()
        .map(|g| {
            scored
                .binary_search_by(|s| s.geoid.cmp(g))
                .map(|i| scored[i].high_deprivation)
                .unwrap_or(false)
        })
        .collect()
}
