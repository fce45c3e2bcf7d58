//! Seeded synthetic block groups on a square grid.
//!
//! Used for fixtures, scale tests and benchmarks. Deprivation follows a
//! smooth latent surface made of a few random hot spots, so high-scoring
//! cells cluster the way they do in real cities.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{BlockGroupRecord, Geoid, Geometry, Polygon};

/// Unit squares `cell` wide laid out row-major, geoids `{state}{index:010}`.
pub fn grid_geometries(cols: usize, rows: usize, cell: f64, state: &str) -> BTreeMap<Geoid, Geometry> {
    (0..rows * cols)
        .map(|i| {
            let g = Geoid::parse(&format!("{state}{i:010}")).expect("valid synthetic geoid");
            let (x, y) = ((i % cols) as f64 * cell, (i / cols) as f64 * cell);
            (g.clone(), square(g, x, y, cell))
        })
        .collect()
}

fn square(geoid: Geoid, x: f64, y: f64, cell: f64) -> Geometry {
    Geometry {
        geoid,
        polygons: vec![Polygon {
            exterior: vec![[x, y], [x + cell, y], [x + cell, y + cell], [x, y + cell], [x, y]],
            interiors: vec![],
        }],
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub cols: usize,
    pub rows: usize,
    /// Cell width in degrees.
    pub cell: f64,
    /// South-west corner (lon, lat).
    pub origin: [f64; 2],
    /// Places are `place_tile × place_tile` blocks of cells.
    pub place_tile: usize,
    /// Rows are split evenly between these states, in order.
    pub states: Vec<String>,
    /// Share of cells left outside any place.
    pub unincorporated: f64,
    pub hot_spots: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            cols: 20,
            rows: 10,
            cell: 0.005,
            origin: [-83.2, 42.3],
            place_tile: 5,
            states: vec!["26".into(), "39".into()],
            unincorporated: 0.05,
            hot_spots: 3,
            seed: 2019,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub records: Vec<BlockGroupRecord>,
    pub geometries: BTreeMap<Geoid, Geometry>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn pct(v: f64) -> f64 {
    (v.clamp(0.0, 100.0) * 100.0).round() / 100.0
}

/// The first place of the first state is always `{state}22000`.
pub fn generate(cfg: &SynthConfig) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (cols, rows) = (cfg.cols.max(1), cfg.rows.max(1));
    let spots: Vec<(f64, f64, f64)> = (0..cfg.hot_spots)
        .map(|_| {
            (
                rng.random_range(0.0..cols as f64),
                rng.random_range(0.0..rows as f64),
                rng.random_range(0.08..0.2) * cols.max(rows) as f64,
            )
        })
        .collect();
    let tiles_x = cols.div_ceil(cfg.place_tile.max(1));
    let rows_per_state = rows.div_ceil(cfg.states.len().max(1));
    let km_per_cell = cfg.cell * 111.0;
    let area_km2 = km_per_cell * km_per_cell * (cfg.origin[1].to_radians().cos());

    let mut records = Vec::with_capacity(cols * rows);
    let mut geometries = BTreeMap::new();
    for r in 0..rows {
        let state = &cfg.states[(r / rows_per_state).min(cfg.states.len() - 1)];
        for c in 0..cols {
            let i = r * cols + c;
            let geoid = Geoid::parse(&format!("{state}{i:010}")).expect("valid synthetic geoid");
            let tile = (r / cfg.place_tile.max(1)) * tiles_x + c / cfg.place_tile.max(1);
            let place_id = (rng.random::<f64>() >= cfg.unincorporated)
                .then(|| format!("{state}{:05}", 22000 + tile * 10));

            let z: f64 = spots
                .iter()
                .map(|&(sx, sy, s)| {
                    let d2 = (c as f64 - sx).powi(2) + (r as f64 - sy).powi(2);
                    (-d2 / (2.0 * s * s)).exp()
                })
                .sum::<f64>()
                .min(1.5);
            let population = if rng.random::<f64>() < 0.01 {
                0
            } else {
                rng.random_range(300..3000u64)
            };
            let (percpov, percvac, unemp, nohs) = if population == 0 {
                (0.0, 0.0, 0.0, 0.0)
            } else {
                (
                    pct(8.0 + 30.0 * z + 5.0 * normal(&mut rng)),
                    pct(6.0 + 20.0 * z + 5.0 * normal(&mut rng)),
                    pct(4.0 + 12.0 * z + 3.0 * normal(&mut rng)),
                    pct(7.0 + 18.0 * z + 4.0 * normal(&mut rng)),
                )
            };
            let percblk = pct(10.0 + 55.0 * z + 10.0 * normal(&mut rng));
            let percwht = pct(100.0 - percblk - rng.random_range(0.0..8.0));
            records.push(BlockGroupRecord {
                geoid: geoid.clone(),
                state_fips: state.clone(),
                place_id,
                percpov,
                percvac,
                unemp,
                nohs,
                population,
                popdens: Some(((population as f64 / area_km2) * 10.0).round() / 10.0),
                percblk: Some(percblk),
                percwht: Some(percwht),
            });
            let (x, y) = (cfg.origin[0] + c as f64 * cfg.cell, cfg.origin[1] + r as f64 * cfg.cell);
            geometries.insert(geoid.clone(), square(geoid, x, y, cfg.cell));
        }
    }
    records.sort_by(|a, b| a.geoid.cmp(&b.geoid));
    Synthetic { records, geometries }
}

/// Records only, for large-n tests where geometry is not needed.
pub fn records(n: usize, seed: u64) -> Vec<BlockGroupRecord> {
    let cols = (n as f64).sqrt().ceil() as usize;
    let cfg = SynthConfig {
        cols: cols.max(1),
        rows: n.div_ceil(cols.max(1)).max(1),
        states: vec!["26".into()],
        hot_spots: 4,
        seed,
        ..SynthConfig::default()
    };
    let mut out = generate(&cfg).records;
    out.truncate(n);
    out
}

/// Writes records in the default attribute column layout.
pub fn write_attributes_csv(path: &Path, records: &[BlockGroupRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "geoid", "place_id", "percpov", "percvac", "unemp", "nohs", "population", "popdens", "percblk",
        "percwht",
    ])
    .map_err(|e| csv_err(path, e))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.geoid.as_str().to_owned(),
            r.place_id.clone().unwrap_or_default(),
            r.percpov.to_string(),
            r.percvac.to_string(),
            r.unemp.to_string(),
            r.nohs.to_string(),
            r.population.to_string(),
            opt(r.popdens),
            opt(r.percblk),
            opt(r.percwht),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Writes a GeoJSON FeatureCollection with a `GEOID` property per feature.
pub fn write_geometry_geojson(path: &Path, geometries: &BTreeMap<Geoid, Geometry>) -> Result<()> {
    let features: Vec<_> = geometries
        .values()
        .map(|g| {
            let polys: Vec<Vec<&Vec<[f64; 2]>>> =
                g.polygons.iter().map(|p| p.rings().collect()).collect();
            json!({
                "type": "Feature",
                "properties": { "GEOID": g.geoid.as_str() },
                "geometry": { "type": "MultiPolygon", "coordinates": polys },
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer(&mut f, &doc).map_err(|e| Error::io(path, e.into()))?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))
}
