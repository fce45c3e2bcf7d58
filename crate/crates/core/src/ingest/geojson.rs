use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use super::{QuarantineEntry, Reason};
use crate::error::{Error, Result};
use crate::model::{Geoid, Geometry, Polygon, Ring};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeometryParse {
    pub geometries: BTreeMap<Geoid, Geometry>,
    pub quarantine: Vec<QuarantineEntry>,
}

pub fn parse_geometry_geojson(path: &Path) -> Result<GeometryParse> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_geometry_str(&text, path)
}

/// Parse a FeatureCollection whose features carry a `GEOID` property.
pub fn parse_geometry_str(text: &str, path: &Path) -> Result<GeometryParse> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_owned(),
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let schema_err = |msg: &str| Error::Parse {
        path: path.to_owned(),
        offset: 0,
        message: msg.to_owned(),
    };
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(schema_err("top-level object is not a FeatureCollection"));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| schema_err("FeatureCollection has no `features` array"))?;

    let source = path.display().to_string();
    let mut out = GeometryParse::default();
    for (i, feature) in features.iter().enumerate() {
        match parse_feature(feature) {
            Ok(g) if out.geometries.contains_key(&g.geoid) => {
                out.quarantine
                    .push(entry(&source, i, Reason::DuplicateGeoid, feature));
            }
            Ok(g) => {
                out.geometries.insert(g.geoid.clone(), g);
            }
            Err(reason) => out.quarantine.push(entry(&source, i, reason, feature)),
        }
    }
    Ok(out)
}

fn entry(source: &str, index: usize, reason: Reason, feature: &Value) -> QuarantineEntry {
    let mut raw = feature.to_string();
    if raw.len() > 512 {
        let mut cut = 512;
        while !raw.is_char_boundary(cut) {
            cut -= 1;
        }
        raw.truncate(cut);
        raw.push('…');
    }
    QuarantineEntry {
        source: source.to_owned(),
        line: index as u64 + 1,
        reason,
        raw,
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn parse_feature(feature: &Value) -> Result<Geometry, Reason> {
    let props = feature.get("properties");
    let geoid = ["GEOID", "geoid"]
        .iter()
        .find_map(|k| props.and_then(|p| p.get(*k)))
        .and_then(|v| match v {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
        .and_then(|s| Geoid::parse(&s).ok())
        .ok_or(Reason::BadGeoid)?;

    let geometry = feature
        .get("geometry")
        .ok_or(Reason::UnsupportedGeometry)?;
    let coords = geometry.get("coordinates");
    let polygons = match geometry.get("type").and_then(Value::as_str) {
        Some("Polygon") => vec![polygon(coords.ok_or(Reason::BadRing)?)?],
        Some("MultiPolygon") => coords
            .and_then(Value::as_array)
            .ok_or(Reason::BadRing)?
            .iter()
            .map(polygon)
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(Reason::UnsupportedGeometry),
    };
    if polygons.is_empty() {
        return Err(Reason::BadRing);
    }
    Ok(Geometry { geoid, polygons })
}

fn polygon(v: &Value) -> Result<Polygon, Reason> {
    let rings = v.as_array().ok_or(Reason::BadRing)?;
    let mut rings = rings.iter().map(ring);
    let exterior = rings.next().ok_or(Reason::BadRing)??;
    let interiors = rings.collect::<Result<Vec<_>, _>>()?;
    Ok(Polygon {
        exterior,
        interiors,
    })
}

fn ring(v: &Value) -> Result<Ring, Reason> {
    let pts = v.as_array().ok_or(Reason::BadRing)?;
    let ring = pts
        .iter()
        .map(|p| {
            let p = p.as_array().ok_or(Reason::BadCoordinate)?;
            let lon = p.first().and_then(Value::as_f64).ok_or(Reason::BadCoordinate)?;
            let lat = p.get(1).and_then(Value::as_f64).ok_or(Reason::BadCoordinate)?;
            if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
                return Err(Reason::BadCoordinate);
            }
            Ok([lon, lat])
        })
        .collect::<Result<Ring, _>>()?;
    if ring.len() < 4 || ring.first() != ring.last() {
        return Err(Reason::BadRing);
    }
    Ok(ring)
}
