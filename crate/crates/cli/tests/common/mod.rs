#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Output;

use depriv_cli::config::RunConfig;
use depriv_cli::fixture;
use depriv_core::model::{BlockGroupRecord, Geoid, Geometry};
use depriv_core::synth;

pub fn rec(geoid: &str, place: Option<&str>, x: [f64; 4], population: u64) -> BlockGroupRecord {
    BlockGroupRecord {
        geoid: Geoid::parse(geoid).unwrap(),
        state_fips: geoid[..2].to_owned(),
        place_id: place.map(str::to_owned),
        percpov: x[0],
        percvac: x[1],
        unemp: x[2],
        nohs: x[3],
        population,
        popdens: Some(1000.0),
        percblk: Some(20.0),
        percwht: Some(70.0),
    }
}

pub fn grid_geoid(i: usize) -> String {
    format!("26{i:010}")
}

/// Writes inputs into a fresh directory and returns a validated config.
pub fn workspace(
    records: &[BlockGroupRecord],
    geometries: Option<&BTreeMap<Geoid, Geometry>>,
) -> (tempfile::TempDir, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let attrs = dir.path().join("attributes.csv");
    synth::write_attributes_csv(&attrs, records).unwrap();
    let mut cfg = RunConfig {
        attributes: vec![attrs],
        out_dir: dir.path().join("out"),
        ..RunConfig::default()
    };
    if let Some(g) = geometries {
        let p = dir.path().join("geometry.geojson");
        synth::write_geometry_geojson(&p, g).unwrap();
        cfg.geometry = Some(p);
    }
    cfg.validate().unwrap();
    (dir, cfg)
}

/// The bundled fixture config with output redirected.
pub fn bundled(out: &Path, workers: usize) -> RunConfig {
    let mut cfg = RunConfig::load(&fixture::bundled_dir().join(fixture::CONFIG)).unwrap();
    cfg.out_dir = out.to_owned();
    cfg.workers = workers;
    cfg.validate().unwrap();
    cfg
}

pub fn depriv(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_depriv"))
        .args(args)
        .output()
        .unwrap()
}

pub fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            header.iter().map(str::to_owned).zip(r.iter().map(str::to_owned)).collect()
        })
        .collect()
}

/// Every file under `dir`, by name.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        out.insert(p.file_name().unwrap().into(), std::fs::read(&p).unwrap());
    }
    out
}
