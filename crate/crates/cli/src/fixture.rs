//! The bundled 200-block-group synthetic fixture.

use std::path::Path;

use depriv_core::synth::{self, SynthConfig, Synthetic};
use depriv_core::Result;

use crate::config::RunConfig;
use crate::files;

pub const ATTRIBUTES: &str = "attributes.csv";
pub const GEOMETRY: &str = "geometry.geojson";
pub const CONFIG: &str = "config.json";

/// 20 × 10 cells over two states, 2 × 2-cell places.
pub fn synth_config() -> SynthConfig {
    SynthConfig {
        place_tile: 2,
        ..SynthConfig::default()
    }
}

pub fn generate() -> Synthetic {
    synth::generate(&synth_config())
}

pub fn run_config() -> RunConfig {
    RunConfig {
        attributes: vec![ATTRIBUTES.into()],
        geometry: Some(GEOMETRY.into()),
        large_city_population: 6000,
        ..RunConfig::default()
    }
}

pub fn write(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| depriv_core::Error::io(dir, e))?;
    let data = generate();
    synth::write_attributes_csv(&dir.join(ATTRIBUTES), &data.records)?;
    synth::write_geometry_geojson(&dir.join(GEOMETRY), &data.geometries)?;
    files::write_json(&dir.join(CONFIG), &run_config())
}

/// The committed fixture directory of this crate.
pub fn bundled_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}
