//! Run configuration: a JSON file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use depriv_core::classify::{SweepDirection, ThresholdSpec};
use depriv_core::ingest::ColumnSchema;
use depriv_core::spatial::{Contiguity, NeighborScope, SnapGrid};
use depriv_core::stats::RobustKind;
use depriv_core::{Error, Execution, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WeightsMode {
    #[default]
    Sd,
    Pca,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Attribute CSVs, merged in order.
    pub attributes: Vec<PathBuf>,
    pub geometry: Option<PathBuf>,
    /// Column mapping JSON; the logical names are used when absent.
    pub schema: Option<PathBuf>,
    /// Place-level covariates, JSON object keyed by region id.
    pub overrides: Option<PathBuf>,
    /// Custom city membership CSV `region_id,geoid`.
    pub cities: Option<PathBuf>,
    pub include_noncontiguous: bool,
    pub weights: WeightsMode,
    pub weights_file: Option<PathBuf>,
    pub threshold: ThresholdSpec,
    pub contiguity: Contiguity,
    pub snap_precision: f64,
    pub within_city_only: bool,
    pub sweep_direction: SweepDirection,
    pub sweep_step: u32,
    pub histogram_bin: f64,
    pub place_min_population: u64,
    pub large_city_population: u64,
    pub robust: RobustKind,
    pub top_n: usize,
    pub out_dir: PathBuf,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            attributes: Vec::new(),
            geometry: None,
            schema: None,
            overrides: None,
            cities: None,
            include_noncontiguous: false,
            weights: WeightsMode::Sd,
            weights_file: None,
            threshold: ThresholdSpec::default(),
            contiguity: Contiguity::Queen,
            snap_precision: SnapGrid::default().precision(),
            within_city_only: false,
            sweep_direction: SweepDirection::Concentrating,
            sweep_step: 10,
            histogram_bin: 1.0,
            place_min_population: 500,
            large_city_population: 250_000,
            robust: RobustKind::HC1,
            top_n: 20,
            out_dir: PathBuf::from("out"),
            workers: 1,
        }
    }
}

impl RunConfig {
    /// Relative paths inside the file are taken relative to the file itself.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            offset: byte_offset(&text, e.line(), e.column()),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.attributes.iter_mut().for_each(rebase);
        for p in [
            &mut cfg.geometry,
            &mut cfg.schema,
            &mut cfg.overrides,
            &mut cfg.cities,
            &mut cfg.weights_file,
        ]
        .into_iter()
        .flatten()
        {
            rebase(p);
        }
        rebase(&mut cfg.out_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let inputs = self.attributes.iter().chain(
            [&self.geometry, &self.schema, &self.overrides, &self.cities, &self.weights_file]
                .into_iter()
                .flatten(),
        );
        for p in inputs {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                ));
            }
        }
        if self.weights == WeightsMode::File && self.weights_file.is_none() {
            return Err(Error::InvalidInput("--weights file needs --weights-file".into()));
        }
        if !(self.histogram_bin > 0.0) {
            return Err(Error::InvalidInput("histogram_bin must be > 0".into()));
        }
        SnapGrid::new(self.snap_precision)?;
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        Ok(())
    }

    pub fn execution(&self) -> Execution {
        Execution::with_workers(self.workers)
    }

    pub fn scope(&self) -> NeighborScope {
        if self.within_city_only {
            NeighborScope::WithinCity
        } else {
            NeighborScope::Dataset
        }
    }

    pub fn column_schema(&self) -> Result<ColumnSchema> {
        match &self.schema {
            None => Ok(ColumnSchema::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum::<usize>() + column
}
