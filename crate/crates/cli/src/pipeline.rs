//! The five pipeline stages. Each stage re-reads the primary inputs plus the
//! files written by earlier stages, so any stage can be rerun on its own.

use std::collections::BTreeMap;

use depriv_core::classify::{
    classify_high, pct_high_by_region, region_median, resolve_threshold, summary_stats,
    suspect_complete, CovariateOverride, Regions, SummaryStats, ThresholdSpec,
};
use depriv_core::index::{
    city_local_weights_all, compute_sd_stats, pca_weights, place_level_score, raw_scores,
    rescale_0_100, sd_weights, variant_correlations, CityVariants, PcaResult, Rescaling,
    WeightFile, VARIANT_NAMES,
};
use depriv_core::ingest::{join, parse_attributes_files, parse_geometry_geojson, write_quarantine_jsonl, Dataset, ParseOptions};
use depriv_core::model::{BlockGroupRecord, ModelKind, RegionKind, RegionSummary, ScoredBlockGroup, WeightVector};
use depriv_core::spatial::{build_adjacency, dispersion, node_high_flags, Contiguity, Dispersion, NeighborScope, SnapGrid};
use depriv_core::stats::{build_design, logistic_fit, ols_fit, Covariate, DroppedRegion, LogisticOptions, Response};
use depriv_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, WeightsMode};
use crate::files::{self, fmt3};

pub fn load_dataset(cfg: &RunConfig, with_geometry: bool) -> Result<Dataset> {
    if cfg.attributes.is_empty() {
        return Err(Error::InvalidInput("no attribute files configured".into()));
    }
    let opts = ParseOptions {
        include_noncontiguous: cfg.include_noncontiguous,
    };
    let mut data = parse_attributes_files(&cfg.attributes, &cfg.column_schema()?, &opts, cfg.execution())?;
    if data.records.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no valid block groups ({} rows quarantined)",
            data.quarantine.len()
        )));
    }
    if with_geometry {
        if let Some(path) = &cfg.geometry {
            let parsed = parse_geometry_geojson(path)?;
            data.quarantine.extend(parsed.quarantine);
            data = join(data, &parsed.geometries);
        }
    }
    Ok(data)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreOutcome {
    pub n_records: usize,
    pub n_quarantined: usize,
    pub weights: WeightFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaResult>,
}

pub fn cmd_score(cfg: &RunConfig) -> Result<ScoreOutcome> {
    let exec = cfg.execution();
    let data = load_dataset(cfg, true)?;
    let records = &data.records;
    let mut pca = None;
    let (weights, fixed_rescale): (WeightVector, Option<Rescaling>) = match cfg.weights {
        WeightsMode::Sd => (sd_weights(&compute_sd_stats(records, exec)?), None),
        WeightsMode::Pca => {
            let p = pca_weights(records, exec)?;
            let w = p.weights();
            pca = Some(p);
            (w, None)
        }
        WeightsMode::File => {
            let path = cfg.weights_file.as_ref().expect("validated");
            let file: WeightFile = files::read_json(path)?;
            (file.weight_vector()?, Some(file.rescale))
        }
    };
    let raw = raw_scores(records, &weights, exec);
    let raw_values: Vec<f64> = raw.iter().map(|r| r.1).collect();
    let (scores, rescale) = match fixed_rescale {
        Some(r) => (raw_values.iter().map(|&v| r.apply(v)).collect(), r),
        None => rescale_0_100(&raw_values)?,
    };
    let scored: Vec<ScoredBlockGroup> = raw
        .into_iter()
        .zip(scores)
        .map(|((geoid, raw_score), score)| ScoredBlockGroup {
            geoid,
            raw_score,
            score,
            high_deprivation: false,
        })
        .collect();

    files::write_scores(&cfg.out(files::SCORES), &scored)?;
    let weight_file = WeightFile::new(&weights, rescale);
    files::write_json(&cfg.out(files::WEIGHTS), &weight_file)?;
    if let Some(p) = &pca {
        files::write_json(&cfg.out("pca.json"), p)?;
    }
    write_quarantine_jsonl(&cfg.out(files::QUARANTINE), &data.quarantine)?;
    log::info!(
        "scored {} block groups, {} rows quarantined",
        scored.len(),
        data.quarantine.len()
    );
    Ok(ScoreOutcome {
        n_records: scored.len(),
        n_quarantined: data.quarantine.len(),
        weights: weight_file,
        pca,
    })
}

/// Region summaries for every partition in use.
#[derive(Debug, Clone)]
pub struct Partitions {
    pub places: Regions,
    pub states: Regions,
    pub cities: Option<Regions>,
}

impl Partitions {
    pub fn new(cfg: &RunConfig, records: &[BlockGroupRecord]) -> Result<Self> {
        let cities = match &cfg.cities {
            Some(p) => Some(Regions::custom(records, &files::read_cities(p)?)),
            None => None,
        };
        Ok(Partitions {
            places: Regions::from_records(records, RegionKind::Place),
            states: Regions::from_records(records, RegionKind::State),
            cities,
        })
    }

    pub fn large_city_regions(&self, cfg: &RunConfig, places: &[RegionSummary]) -> Regions {
        match &self.cities {
            Some(c) => c.clone(),
            None => {
                let keep: Vec<&str> = places
                    .iter()
                    .filter(|s| s.population >= cfg.large_city_population)
                    .map(|s| s.region_id.as_str())
                    .collect();
                Regions {
                    kind: RegionKind::Place,
                    members: self
                        .places
                        .members
                        .iter()
                        .filter(|(k, _)| keep.contains(&k.as_str()))
                        .map(|(k, v)| (k.clone(), v.clone()))
                        .collect(),
                }
            }
        }
    }
}

pub struct Summaries {
    pub places: Vec<RegionSummary>,
    pub states: Vec<RegionSummary>,
    pub cities: Option<Vec<RegionSummary>>,
}

pub fn load_overrides(cfg: &RunConfig) -> Result<Option<BTreeMap<String, CovariateOverride>>> {
    cfg.overrides.as_deref().map(files::read_json).transpose()
}

pub fn summarize(
    cfg: &RunConfig,
    parts: &Partitions,
    records: &[BlockGroupRecord],
    scored: &[ScoredBlockGroup],
) -> Result<Summaries> {
    let overrides = load_overrides(cfg)?;
    Ok(Summaries {
        places: pct_high_by_region(scored, records, &parts.places, overrides.as_ref())?,
        states: pct_high_by_region(scored, records, &parts.states, None)?,
        cities: parts
            .cities
            .as_ref()
            .map(|c| pct_high_by_region(scored, records, c, overrides.as_ref()))
            .transpose()?,
    })
}

fn write_summaries(cfg: &RunConfig, s: &Summaries) -> Result<()> {
    files::write_regions(&cfg.out("regions_place.csv"), &s.places)?;
    files::write_regions(&cfg.out("regions_state.csv"), &s.states)?;
    if let Some(c) = &s.cities {
        files::write_regions(&cfg.out("regions_city.csv"), c)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantReport {
    pub names: [String; 3],
    pub correlations: Option<[[f64; 3]; 3]>,
    pub cities: Vec<CityVariants>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub threshold_spec: ThresholdSpec,
    pub threshold: f64,
    pub n: usize,
    pub n_high: usize,
    pub pct_high: f64,
    pub large_city_n: usize,
    pub large_city_high: usize,
    pub high_by_state: BTreeMap<String, usize>,
    pub suspect_complete: Vec<String>,
    pub summary_stats: BTreeMap<String, SummaryStats>,
    pub variants: VariantReport,
}

fn variants(
    cfg: &RunConfig,
    records: &[BlockGroupRecord],
    scored: &[ScoredBlockGroup],
    large: &Regions,
) -> Result<VariantReport> {
    let exec = cfg.execution();
    let weight_file: WeightFile = files::read_json(&cfg.out(files::WEIGHTS))?;
    let national = weight_file.weight_vector()?;
    let members: BTreeMap<String, Vec<&BlockGroupRecord>> = large
        .members
        .iter()
        .map(|(k, v)| (k.clone(), v.iter().map(|&i| &records[i]).collect()))
        .collect();
    let (local, skipped) = city_local_weights_all(&members, exec);
    let mut warnings: Vec<String> = skipped
        .into_iter()
        .map(|(id, e)| format!("city {id} excluded: {e}"))
        .collect();
    let mut cities = Vec::new();
    for (id, w) in &local {
        let idx = &large.members[id];
        let local_scores: Vec<f64> = idx
            .iter()
            .map(|&i| depriv_core::index::raw_score(&records[i].components(), w))
            .collect();
        let national_scores: Vec<f64> = idx.iter().map(|&i| scored[i].score).collect();
        let total_pop: f64 = idx.iter().map(|&i| records[i].population as f64).sum();
        if total_pop <= 0.0 {
            warnings.push(format!("city {id} excluded: zero population"));
            continue;
        }
        let place: [f64; 4] = std::array::from_fn(|k| {
            idx.iter()
                .map(|&i| records[i].population as f64 * records[i].components()[k])
                .sum::<f64>()
                / total_pop
        });
        cities.push(CityVariants {
            city_id: id.clone(),
            city_weights: region_median(&local_scores)?,
            national_weights: region_median(&national_scores)?,
            place_level: weight_file.rescale.apply(place_level_score(&place, &national)),
        });
    }
    let correlations = match variant_correlations(&cities) {
        Ok(m) => Some(m),
        Err(e) => {
            warnings.push(format!("variant correlations unavailable: {e}"));
            None
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(VariantReport {
        names: VARIANT_NAMES.map(str::to_owned),
        correlations,
        cities,
        warnings,
    })
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<ClassifyReport> {
    let data = load_dataset(cfg, false)?;
    let records = &data.records;
    let mut scored = files::load_scores(&cfg.out(files::SCORES), records, false)?;
    let parts = Partitions::new(cfg, records)?;
    let mut lookup = vec![&parts.places];
    lookup.extend(parts.cities.as_ref());
    let threshold = resolve_threshold(&cfg.threshold, &scored, &lookup)?;
    let n_high = classify_high(&mut scored, threshold);
    files::write_classified(&cfg.out(files::CLASSIFIED), &scored)?;

    let summaries = summarize(cfg, &parts, records, &scored)?;
    write_summaries(cfg, &summaries)?;

    let large = parts.large_city_regions(cfg, &summaries.places);
    let large_idx: Vec<usize> = large.members.values().flatten().copied().collect();
    let mut stats = BTreeMap::new();
    let all: Vec<f64> = scored.iter().map(|s| s.score).collect();
    stats.insert("all".to_owned(), summary_stats(&all)?);
    let large_scores: Vec<f64> = large_idx.iter().map(|&i| scored[i].score).collect();
    if let Ok(s) = summary_stats(&large_scores) {
        stats.insert("large_cities".to_owned(), s);
    }
    let high_scores: Vec<f64> = scored.iter().filter(|s| s.high_deprivation).map(|s| s.score).collect();
    if let Ok(s) = summary_stats(&high_scores) {
        stats.insert("high_deprivation".to_owned(), s);
    }
    files::write_csv(
        &cfg.out("summary_stats.csv"),
        &["group", "n", "min", "mean", "median", "max", "sd"],
        stats.iter().map(|(g, s)| {
            [
                g.clone(),
                s.n.to_string(),
                fmt3(s.min),
                fmt3(s.mean),
                fmt3(s.median),
                fmt3(s.max),
                fmt3(s.sd),
            ]
        }),
    )?;

    let mut high_by_state = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        *high_by_state.entry(r.state_fips.clone()).or_insert(0) += usize::from(scored[i].high_deprivation);
    }
    let mut suspect = suspect_complete(&summaries.places);
    if let Some(c) = &summaries.cities {
        suspect.extend(suspect_complete(c));
    }
    let report = ClassifyReport {
        threshold_spec: cfg.threshold.clone(),
        threshold,
        n: scored.len(),
        n_high,
        pct_high: 100.0 * n_high as f64 / scored.len() as f64,
        large_city_n: large_idx.len(),
        large_city_high: large_idx.iter().filter(|&&i| scored[i].high_deprivation).count(),
        high_by_state,
        suspect_complete: suspect,
        summary_stats: stats,
        variants: variants(cfg, records, &scored, &large)?,
    };
    files::write_json(&cfg.out(files::CLASSIFY_JSON), &report)?;
    log::info!("threshold {threshold:.3}: {n_high} of {} block groups high", scored.len());
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionDispersion {
    pub region_kind: RegionKind,
    #[serde(flatten)]
    pub dispersion: Dispersion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersionReport {
    pub contiguity: Contiguity,
    pub scope: NeighborScope,
    pub snap_precision: f64,
    pub nodes: usize,
    pub edges: usize,
    pub regions: BTreeMap<String, RegionDispersion>,
    /// Regions with at least one member lacking geometry; no value computed.
    pub missing_geometry: Vec<String>,
}

pub fn cmd_dispersion(cfg: &RunConfig) -> Result<DispersionReport> {
    if cfg.geometry.is_none() {
        return Err(Error::InvalidInput("dispersion needs a geometry file".into()));
    }
    let data = load_dataset(cfg, true)?;
    let records = &data.records;
    let scored = files::load_scores(&cfg.out(files::CLASSIFIED), records, true)?;
    let geoms = data.geometries.clone().unwrap_or_default();
    let snap = SnapGrid::new(cfg.snap_precision)?;
    let graph = build_adjacency(&geoms, snap, cfg.contiguity, cfg.execution());
    files::write_csv(
        &cfg.out(files::ADJACENCY),
        &["geoid_a", "geoid_b"],
        graph.geoid_pairs().map(|(a, b)| [a.to_string(), b.to_string()]),
    )?;
    let high = node_high_flags(&graph, &scored);

    let parts = Partitions::new(cfg, records)?;
    let mut summaries = summarize(cfg, &parts, records, &scored)?;
    let mut regions = BTreeMap::new();
    let mut missing = Vec::new();
    let mut kinds = vec![(&parts.places, &mut summaries.places)];
    if let (Some(c), Some(s)) = (&parts.cities, summaries.cities.as_mut()) {
        kinds.push((c, s));
    }
    for (partition, sums) in kinds {
        for s in sums.iter_mut() {
            let members = &partition.members[&s.region_id];
            let nodes: Option<Vec<usize>> = members
                .iter()
                .map(|&i| graph.index_of(&records[i].geoid))
                .collect();
            let Some(nodes) = nodes else {
                log::warn!("region {}: members without geometry, dispersion absent", s.region_id);
                missing.push(s.region_id.clone());
                continue;
            };
            let d = dispersion(&nodes, &high, &graph, cfg.scope())?;
            s.dispersion = Some(d.value);
            regions.insert(
                s.region_id.clone(),
                RegionDispersion {
                    region_kind: s.region_kind,
                    dispersion: d,
                },
            );
        }
    }
    write_summaries(cfg, &summaries)?;
    let report = DispersionReport {
        contiguity: cfg.contiguity,
        scope: cfg.scope(),
        snap_precision: cfg.snap_precision,
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        regions,
        missing_geometry: missing,
    };
    files::write_json(&cfg.out(files::DISPERSION_JSON), &report)?;
    Ok(report)
}

/// Region summaries with dispersion attached from an earlier dispersion run.
pub fn summaries_with_dispersion(
    cfg: &RunConfig,
    parts: &Partitions,
    records: &[BlockGroupRecord],
    scored: &[ScoredBlockGroup],
) -> Result<(Summaries, bool)> {
    let mut s = summarize(cfg, parts, records, scored)?;
    let path = cfg.out(files::DISPERSION_JSON);
    if !path.is_file() {
        return Ok((s, false));
    }
    let report: DispersionReport = files::read_json(&path)?;
    let attach = |list: &mut Vec<RegionSummary>| {
        for r in list.iter_mut() {
            r.dispersion = report
                .regions
                .get(&r.region_id)
                .filter(|d| d.region_kind == r.region_kind)
                .map(|d| d.dispersion.value);
        }
    };
    attach(&mut s.places);
    if let Some(c) = s.cities.as_mut() {
        attach(c);
    }
    Ok((s, true))
}

/// One regression specification.
#[derive(Debug, Clone, Copy)]
pub struct Spec {
    pub table: &'static str,
    pub sample: Sample,
    pub response: Response,
    pub columns: &'static [&'static [Covariate]],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sample {
    /// Places at or above the place population cutoff.
    Places,
    /// Those places with %HD > 0.
    PlacesWithHigh,
    LargeCities,
}

const MAIN_COLUMNS: &[&[Covariate]] = &[
    &[Covariate::Percpov],
    &[Covariate::Percpov, Covariate::LogPopdens],
    &[Covariate::Percpov, Covariate::LogPopdens, Covariate::Percblk],
    &[Covariate::Percpov, Covariate::LogPopdens, Covariate::Percwht],
];

const DISPERSION_COLUMNS: &[&[Covariate]] = &[
    &[Covariate::Percpov],
    &[Covariate::Percpov, Covariate::LogPopdens],
    &[Covariate::Percpov, Covariate::Percblk],
    &[Covariate::Percpov, Covariate::Percwht],
];

pub const SPECS: [Spec; 4] = [
    Spec {
        table: "hd_positive_places",
        sample: Sample::Places,
        response: Response::HdPositive,
        columns: MAIN_COLUMNS,
    },
    Spec {
        table: "pct_hd_places",
        sample: Sample::PlacesWithHigh,
        response: Response::PctHd,
        columns: MAIN_COLUMNS,
    },
    Spec {
        table: "pct_hd_large_cities",
        sample: Sample::LargeCities,
        response: Response::PctHd,
        columns: MAIN_COLUMNS,
    },
    Spec {
        table: "dispersion_large_cities",
        sample: Sample::LargeCities,
        response: Response::Dispersion,
        columns: DISPERSION_COLUMNS,
    },
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub table: String,
    pub column: usize,
    pub model: ModelKind,
    pub response: Response,
    pub columns: Vec<String>,
    #[serde(flatten)]
    pub outcome: FitOutcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FitOutcome {
    Fit(Box<FitDetails>),
    Failed { error: String, n: usize, dropped: Vec<DroppedRegion> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDetails {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adj_r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_r2: Option<f64>,
    pub n: usize,
    pub dropped: Vec<DroppedRegion>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn fit(&self) -> Option<&FitDetails> {
        match &self.outcome {
            FitOutcome::Fit(d) => Some(d),
            FitOutcome::Failed { .. } => None,
        }
    }
}

pub fn sample<'a>(
    cfg: &RunConfig,
    which: Sample,
    places: &'a [RegionSummary],
    cities: Option<&'a [RegionSummary]>,
) -> Vec<RegionSummary> {
    let eligible = places.iter().filter(|s| s.population >= cfg.place_min_population);
    match which {
        Sample::Places => eligible.cloned().collect(),
        Sample::PlacesWithHigh => eligible.filter(|s| s.pct_high > 0.0).cloned().collect(),
        Sample::LargeCities => match cities {
            Some(c) => c.to_vec(),
            None => places
                .iter()
                .filter(|s| s.population >= cfg.large_city_population)
                .cloned()
                .collect(),
        },
    }
}

pub fn fit_one(cfg: &RunConfig, spec: &Spec, column: usize, regions: &[RegionSummary]) -> FitReport {
    let covs = spec.columns[column];
    let model = if spec.response == Response::HdPositive {
        ModelKind::Logistic
    } else {
        ModelKind::OLS
    };
    let mut report = FitReport {
        table: spec.table.to_owned(),
        column: column + 1,
        model,
        response: spec.response,
        columns: covs.iter().map(|c| c.label().to_owned()).collect(),
        outcome: FitOutcome::Failed {
            error: String::new(),
            n: 0,
            dropped: Vec::new(),
        },
    };
    let built = match build_design(regions, covs, spec.response) {
        Ok(b) => b,
        Err(e) => {
            report.outcome = FitOutcome::Failed {
                error: e.to_string(),
                n: 0,
                dropped: Vec::new(),
            };
            return report;
        }
    };
    let fit = match model {
        ModelKind::OLS => Ok(ols_fit(&built.design, cfg.robust)),
        ModelKind::Logistic => logistic_fit(&built.design, LogisticOptions::default()),
    };
    report.outcome = match fit {
        Ok(f) => FitOutcome::Fit(Box::new(FitDetails {
            names: f.names,
            coef: f.coef,
            se: f.se,
            p: f.p_values,
            r2: (model == ModelKind::OLS).then_some(f.r2),
            adj_r2: f.adj_r2,
            pseudo_r2: (model == ModelKind::Logistic).then_some(f.r2),
            n: f.n_obs,
            dropped: built.dropped,
            converged: f.converged,
            iterations: f.iterations,
            warnings: f.warnings,
        })),
        Err(e) => FitOutcome::Failed {
            error: e.to_string(),
            n: built.design.n(),
            dropped: built.dropped,
        },
    };
    report
}

pub fn cmd_regress(cfg: &RunConfig) -> Result<Vec<FitReport>> {
    let data = load_dataset(cfg, false)?;
    let records = &data.records;
    let scored = files::load_scores(&cfg.out(files::CLASSIFIED), records, true)?;
    let parts = Partitions::new(cfg, records)?;
    let (sums, have_dispersion) = summaries_with_dispersion(cfg, &parts, records, &scored)?;
    if !have_dispersion {
        log::warn!("no dispersion results; the dispersion models will fail");
    }
    let jobs: Vec<(usize, usize)> = SPECS
        .iter()
        .enumerate()
        .flat_map(|(s, spec)| (0..spec.columns.len()).map(move |c| (s, c)))
        .collect();
    let samples: Vec<Vec<RegionSummary>> = SPECS
        .iter()
        .map(|spec| sample(cfg, spec.sample, &sums.places, sums.cities.as_deref()))
        .collect();
    let exec = cfg.execution();
    let fits = exec.install(|| exec.map(&jobs, |&(s, c)| fit_one(cfg, &SPECS[s], c, &samples[s])));
    for f in &fits {
        if let FitOutcome::Failed { error, .. } = &f.outcome {
            log::warn!("{} column {}: {error}", f.table, f.column);
        }
    }
    files::write_json(&cfg.out("fits.json"), &fits)?;
    files::write_text(&cfg.out("fits.txt"), &crate::report::fit_tables(&fits))?;
    Ok(fits)
}
