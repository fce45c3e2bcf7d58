//! Attribute and boundary ingestion.

mod attributes;
mod fetch;
mod geojson;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockGroupRecord, Geoid, Geometry};

pub use attributes::{
    parse_attributes_csv, parse_attributes_files, parse_attributes_reader, ColumnSchema,
    ColumnSource, ParseOptions,
};
pub use fetch::{fetch_acs, FetchOptions, ACS_2015_2019_VARIABLES};
pub use geojson::{parse_geometry_geojson, parse_geometry_str, GeometryParse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    BadGeoid,
    OutOfRange,
    NonNumeric,
    DuplicateGeoid,
    NoncontiguousState,
    ZeroDenominator,
    BadRing,
    BadCoordinate,
    UnsupportedGeometry,
    OrphanGeometry,
}

impl Reason {
    pub fn code(&self) -> &'static str {
        match self {
            Reason::BadGeoid => "BAD_GEOID",
            Reason::OutOfRange => "OUT_OF_RANGE",
            Reason::NonNumeric => "NON_NUMERIC",
            Reason::DuplicateGeoid => "DUPLICATE_GEOID",
            Reason::NoncontiguousState => "NONCONTIGUOUS_STATE",
            Reason::ZeroDenominator => "ZERO_DENOMINATOR",
            Reason::BadRing => "BAD_RING",
            Reason::BadCoordinate => "BAD_COORDINATE",
            Reason::UnsupportedGeometry => "UNSUPPORTED_GEOMETRY",
            Reason::OrphanGeometry => "ORPHAN_GEOMETRY",
        }
    }
}

/// One rejected input row or feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub source: String,
    /// 1-based physical line for CSV rows, 1-based feature index for GeoJSON.
    pub line: u64,
    pub reason: Reason,
    pub raw: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    /// Sorted by geoid, unique.
    pub records: Vec<BlockGroupRecord>,
    pub geometries: Option<BTreeMap<Geoid, Geometry>>,
    pub provenance: String,
    pub quarantine: Vec<QuarantineEntry>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn find(&self, geoid: &Geoid) -> Option<&BlockGroupRecord> {
        self.records
            .binary_search_by(|r| r.geoid.cmp(geoid))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn quarantine_count(&self, reason: Reason) -> usize {
        self.quarantine.iter().filter(|q| q.reason == reason).count()
    }
}

const JOIN_NOTE: &str = "geometry joined on GEOID";

/// Attach geometries by exact GEOID match. Geometries without a record go to
/// quarantine as `ORPHAN_GEOMETRY`; re-joining the same map is a no-op.
pub fn join(mut attrs: Dataset, geoms: &BTreeMap<Geoid, Geometry>) -> Dataset {
    if geoms.is_empty() {
        add_note(&mut attrs.provenance, "no geometry supplied");
        return attrs;
    }
    let mut attached = attrs.geometries.take().unwrap_or_default();
    for (geoid, geometry) in geoms {
        if attrs.find(geoid).is_some() {
            attached.insert(geoid.clone(), geometry.clone());
        } else {
            let entry = QuarantineEntry {
                source: "geometry".into(),
                line: 0,
                reason: Reason::OrphanGeometry,
                raw: geoid.to_string(),
            };
            if !attrs.quarantine.contains(&entry) {
                attrs.quarantine.push(entry);
            }
        }
    }
    attrs.geometries = Some(attached);
    add_note(&mut attrs.provenance, JOIN_NOTE);
    attrs
}

fn add_note(provenance: &mut String, note: &str) {
    if provenance.split("; ").any(|n| n == note) {
        return;
    }
    if !provenance.is_empty() {
        provenance.push_str("; ");
    }
    provenance.push_str(note);
}

/// Quarantine report as JSON lines.
pub fn write_quarantine_jsonl(path: &Path, entries: &[QuarantineEntry]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for entry in entries {
        let line = serde_json::to_string(entry).expect("quarantine entry serializes");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
