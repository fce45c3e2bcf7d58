//! `depriv` command-line pipeline: score → classify → dispersion → regress → report,
//! with every stage reading and writing plain files in the output directory.

pub mod config;
pub mod files;
pub mod fixture;
pub mod pipeline;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use depriv_core::classify::{SweepDirection, ThresholdSpec};
use depriv_core::ingest::{fetch_acs, FetchOptions, ACS_2015_2019_VARIABLES};
use depriv_core::spatial::Contiguity;
use depriv_core::{Error, ErrorFamily, Result};

use config::{RunConfig, WeightsMode};

pub const DEFAULT_ENDPOINT: &str = "https://api.census.gov/data/2019/acs/acs5";

#[derive(Debug, Parser)]
#[command(name = "depriv", version, about = "Block-group deprivation index pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags below override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Attribute CSV (repeatable).
    #[arg(long = "attributes", global = true)]
    pub attributes: Vec<PathBuf>,
    #[arg(long, global = true)]
    pub geometry: Option<PathBuf>,
    /// Custom city membership CSV `region_id,geoid`.
    #[arg(long, global = true)]
    pub cities: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub weights: Option<WeightsMode>,
    #[arg(long, global = true)]
    pub weights_file: Option<PathBuf>,
    /// `region:<id>` or `value:<x>`.
    #[arg(long, global = true, value_parser = parse_threshold)]
    pub threshold: Option<ThresholdSpec>,
    /// `queen` or `rook`.
    #[arg(long, global = true, value_parser = parse_contiguity)]
    pub contiguity: Option<Contiguity>,
    #[arg(long, global = true)]
    pub within_city_only: bool,
    /// `concentrating` or `diluting`.
    #[arg(long, global = true, value_parser = parse_sweep)]
    pub sweep_direction: Option<SweepDirection>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

fn parse_threshold(s: &str) -> std::result::Result<ThresholdSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_contiguity(s: &str) -> std::result::Result<Contiguity, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_sweep(s: &str) -> std::result::Result<SweepDirection, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute weights and per-block-group scores.
    Score,
    /// Apply the threshold and summarise places, states and cities.
    Classify,
    /// Build the contiguity graph and compute per-region dispersion.
    Dispersion,
    /// Fit the place and large-city regression models.
    Regress,
    /// Histogram, map export, rankings and sweeps.
    Report,
    /// Every stage in order.
    Run,
    /// Download ACS block-group tables, one CSV per state.
    Fetch(FetchArgs),
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// Two-digit state FIPS codes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub states: Vec<String>,
    #[arg(long, default_value = "2015-2019")]
    pub year_span: String,
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    pub endpoint: String,
    /// Variable ids, comma separated; the index inputs by default.
    #[arg(long, value_delimiter = ',')]
    pub variables: Vec<String>,
    #[arg(long, env = "CENSUS_API_KEY")]
    pub api_key: Option<String>,
}

impl GlobalArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if !self.attributes.is_empty() {
            cfg.attributes = self.attributes.clone();
        }
        if let Some(g) = &self.geometry {
            cfg.geometry = Some(g.clone());
        }
        if let Some(c) = &self.cities {
            cfg.cities = Some(c.clone());
        }
        if let Some(w) = self.weights {
            cfg.weights = w;
        }
        if let Some(f) = &self.weights_file {
            cfg.weights_file = Some(f.clone());
        }
        if let Some(t) = &self.threshold {
            cfg.threshold = t.clone();
        }
        if let Some(c) = self.contiguity {
            cfg.contiguity = c;
        }
        if self.within_city_only {
            cfg.within_city_only = true;
        }
        if let Some(d) = self.sweep_direction {
            cfg.sweep_direction = d;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(cfg)
    }
}

/// Process exit code for an error family. Success is 0.
pub fn exit_code(family: ErrorFamily) -> u8 {
    match family {
        ErrorFamily::Input => 2,
        ErrorFamily::Io => 3,
        ErrorFamily::Schema => 4,
        ErrorFamily::EmptyInput => 5,
        ErrorFamily::Numeric => 6,
        ErrorFamily::Region => 7,
        ErrorFamily::Regression => 8,
        ErrorFamily::Network => 9,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.global.resolve()?;
    if let Command::Fetch(args) = &cli.command {
        return fetch(&cfg, args);
    }
    cfg.validate()?;
    let exec = cfg.execution();
    exec.install(|| match cli.command {
        Command::Score => pipeline::cmd_score(&cfg).map(drop),
        Command::Classify => pipeline::cmd_classify(&cfg).map(drop),
        Command::Dispersion => pipeline::cmd_dispersion(&cfg).map(drop),
        Command::Regress => pipeline::cmd_regress(&cfg).map(drop),
        Command::Report => report::cmd_report(&cfg).map(drop),
        Command::Run => run_all(&cfg),
        Command::Fetch(_) => unreachable!(),
    })
}

/// All stages; dispersion is skipped without a geometry file.
pub fn run_all(cfg: &RunConfig) -> Result<()> {
    pipeline::cmd_score(cfg)?;
    pipeline::cmd_classify(cfg)?;
    if cfg.geometry.is_some() {
        pipeline::cmd_dispersion(cfg)?;
    } else {
        log::warn!("no geometry file; skipping dispersion");
    }
    pipeline::cmd_regress(cfg)?;
    report::cmd_report(cfg)?;
    Ok(())
}

fn fetch(cfg: &RunConfig, args: &FetchArgs) -> Result<()> {
    let vars: Vec<&str> = if args.variables.is_empty() {
        ACS_2015_2019_VARIABLES.to_vec()
    } else {
        args.variables.iter().map(String::as_str).collect()
    };
    let states: Vec<&str> = args.states.iter().map(String::as_str).collect();
    let mut opts = FetchOptions::new(&cfg.out_dir);
    opts.api_key = args.api_key.clone();
    let written = fetch_acs(&args.year_span, &vars, &states, &args.endpoint, &opts, cfg.execution())?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}
