//! High-deprivation classification and regional aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::pairwise_sum;
use crate::model::{BlockGroupRecord, Geoid, RegionKind, RegionSummary, ScoredBlockGroup};

/// How the high-deprivation cutoff is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", deny_unknown_fields)]
pub enum ThresholdSpec {
    /// Median score of a benchmark region (Detroit, place 2622000, by default).
    BenchmarkRegionMedian { region_id: String },
    ExplicitValue { value: f64 },
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec::BenchmarkRegionMedian {
            region_id: "2622000".into(),
        }
    }
}

impl FromStr for ThresholdSpec {
    type Err = Error;

    /// `region:<id>` or `value:<x>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("region", id)) if !id.is_empty() => Ok(ThresholdSpec::BenchmarkRegionMedian {
                region_id: id.to_owned(),
            }),
            Some(("value", v)) => v
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|value| ThresholdSpec::ExplicitValue { value })
                .ok_or_else(|| Error::InvalidInput(format!("bad threshold value `{v}`"))),
            _ => Err(Error::InvalidInput(format!(
                "threshold must be region:<id> or value:<x>, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for ThresholdSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdSpec::BenchmarkRegionMedian { region_id } => write!(f, "region:{region_id}"),
            ThresholdSpec::ExplicitValue { value } => write!(f, "value:{value}"),
        }
    }
}

/// Region membership as indices into a geoid-sorted record list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Regions {
    pub kind: RegionKind,
    pub members: BTreeMap<String, Vec<usize>>,
}

impl Regions {
    /// Places (non-empty `place_id`) or states.
    pub fn from_records(records: &[BlockGroupRecord], kind: RegionKind) -> Self {
        let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let key = match kind {
                RegionKind::Place | RegionKind::CustomCity => r.place_id.clone(),
                RegionKind::State => Some(r.state_fips.clone()),
            };
            if let Some(k) = key {
                members.entry(k).or_default().push(i);
            }
        }
        Regions { kind, members }
    }

    /// Explicit `(region_id, geoid)` membership. Unknown geoids are skipped.
    pub fn custom(records: &[BlockGroupRecord], pairs: &[(String, Geoid)]) -> Self {
        let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (region, geoid) in pairs {
            match records.binary_search_by(|r| r.geoid.cmp(geoid)) {
                Ok(i) => members.entry(region.clone()).or_default().push(i),
                Err(_) => log::warn!("city {region}: unknown block group {geoid}"),
            }
        }
        for m in members.values_mut() {
            m.sort_unstable();
            m.dedup();
        }
        Regions {
            kind: RegionKind::CustomCity,
            members,
        }
    }

    pub fn get(&self, id: &str) -> Option<&[usize]> {
        self.members.get(id).map(Vec::as_slice)
    }
}

/// Middle order statistic, or the mean of the two middle ones for even n.
pub fn region_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyRegion(String::new()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Benchmark regions are looked up in each of `lookup` in turn.
pub fn resolve_threshold(
    spec: &ThresholdSpec,
    scored: &[ScoredBlockGroup],
    lookup: &[&Regions],
) -> Result<f64> {
    match spec {
        ThresholdSpec::ExplicitValue { value } => Ok(*value),
        ThresholdSpec::BenchmarkRegionMedian { region_id } => {
            let members = lookup
                .iter()
                .find_map(|r| r.get(region_id))
                .ok_or_else(|| Error::UnknownRegion(region_id.clone()))?;
            let scores: Vec<f64> = members.iter().map(|&i| scored[i].score).collect();
            region_median(&scores).map_err(|_| Error::EmptyRegion(region_id.clone()))
        }
    }
}

/// Sets `high_deprivation = score > threshold` and returns the high count.
pub fn classify_high(scored: &mut [ScoredBlockGroup], threshold: f64) -> usize {
    let mut count = 0;
    for s in scored.iter_mut() {
        s.high_deprivation = s.score > threshold;
        count += usize::from(s.high_deprivation);
    }
    count
}

/// Place-level covariates replacing the population-weighted block-group means.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateOverride {
    pub percpov: Option<f64>,
    pub popdens: Option<f64>,
    pub percblk: Option<f64>,
    pub percwht: Option<f64>,
    pub population: Option<u64>,
}

fn weighted_mean<'a>(
    members: impl Iterator<Item = &'a BlockGroupRecord>,
    value: impl Fn(&BlockGroupRecord) -> Option<f64>,
) -> Option<f64> {
    let (mut num, mut den) = (Vec::new(), Vec::new());
    for r in members {
        if let Some(v) = value(r) {
            let w = r.population as f64;
            num.push(w * v);
            den.push(w);
        }
    }
    let total = pairwise_sum(&den);
    (total > 0.0).then(|| pairwise_sum(&num) / total)
}

/// One summary per region, sorted by descending %HD then region id.
/// `scored` and `records` must be aligned index by index.
pub fn pct_high_by_region(
    scored: &[ScoredBlockGroup],
    records: &[BlockGroupRecord],
    regions: &Regions,
    overrides: Option<&BTreeMap<String, CovariateOverride>>,
) -> Result<Vec<RegionSummary>> {
    if scored.len() != records.len()
        || scored.iter().zip(records).any(|(s, r)| s.geoid != r.geoid)
    {
        return Err(Error::InvalidInput(
            "score rows and attribute records are not aligned by geoid".into(),
        ));
    }
    let mut out = Vec::with_capacity(regions.members.len());
    for (id, members) in &regions.members {
        let scores: Vec<f64> = members.iter().map(|&i| scored[i].score).collect();
        let high = members.iter().filter(|&&i| scored[i].high_deprivation).count();
        let recs = || members.iter().map(|&i| &records[i]);
        let mut summary = RegionSummary {
            region_id: id.clone(),
            region_kind: regions.kind,
            n_bg: members.len(),
            median_score: region_median(&scores).map_err(|_| Error::EmptyRegion(id.clone()))?,
            pct_high: 100.0 * high as f64 / members.len() as f64,
            dispersion: None,
            percpov: weighted_mean(recs(), |r| Some(r.percpov)),
            popdens: weighted_mean(recs(), |r| r.popdens),
            percblk: weighted_mean(recs(), |r| r.percblk),
            percwht: weighted_mean(recs(), |r| r.percwht),
            population: recs().map(|r| r.population).sum(),
        };
        if let Some(o) = overrides.and_then(|m| m.get(id)) {
            summary.percpov = o.percpov.or(summary.percpov);
            summary.popdens = o.popdens.or(summary.popdens);
            summary.percblk = o.percblk.or(summary.percblk);
            summary.percwht = o.percwht.or(summary.percwht);
            summary.population = o.population.unwrap_or(summary.population);
        }
        out.push(summary);
    }
    sort_summaries(&mut out);
    Ok(out)
}

pub fn sort_summaries(summaries: &mut [RegionSummary]) {
    summaries.sort_by(|a, b| {
        b.pct_high
            .total_cmp(&a.pct_high)
            .then_with(|| a.region_id.cmp(&b.region_id))
    });
}

/// Regions where every block group is high-deprivation.
pub fn suspect_complete(summaries: &[RegionSummary]) -> Vec<String> {
    summaries
        .iter()
        .filter(|s| s.pct_high >= 100.0)
        .map(|s| s.region_id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    /// Population form.
    pub sd: f64,
}

pub fn summary_stats(scores: &[f64]) -> Result<SummaryStats> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("summary statistics of no scores".into()));
    }
    let n = scores.len() as f64;
    let mean = pairwise_sum(scores) / n;
    let dev: Vec<f64> = scores.iter().map(|s| (s - mean).powi(2)).collect();
    Ok(SummaryStats {
        n: scores.len(),
        min: scores.iter().copied().fold(f64::INFINITY, f64::min),
        mean,
        median: region_median(scores)?,
        max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        sd: (pairwise_sum(&dev) / n).sqrt(),
    })
}

/// Bins `[k·w, (k+1)·w)` from the lowest to the highest occupied bin.
pub fn histogram(scores: &[f64], bin_width: f64) -> Result<Vec<(f64, usize)>> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::InvalidInput(format!("bin width must be positive, got {bin_width}")));
    }
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &s in scores.iter().filter(|s| s.is_finite()) {
        *counts.entry((s / bin_width).floor() as i64).or_default() += 1;
    }
    let (Some(&lo), Some(&hi)) = (counts.keys().next(), counts.keys().next_back()) else {
        return Ok(Vec::new());
    };
    Ok((lo..=hi)
        .map(|k| (k as f64 * bin_width, counts.get(&k).copied().unwrap_or(0)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    Black,
    White,
}

impl Group {
    pub fn share(&self, r: &BlockGroupRecord) -> Option<f64> {
        match self {
            Group::Black => r.percblk,
            Group::White => r.percwht,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    /// Subset at `t` is share ≥ 100 − t: small t keeps the most concentrated areas.
    #[default]
    Concentrating,
    /// Subset at `t` is share ≤ t.
    Diluting,
}

impl FromStr for SweepDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concentrating" => Ok(SweepDirection::Concentrating),
            "diluting" => Ok(SweepDirection::Diluting),
            _ => Err(Error::InvalidInput(format!("unknown sweep direction `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub n: usize,
    pub median: Option<f64>,
    pub sd: Option<f64>,
    pub population_share: f64,
}

/// Median and spread of scores over nested group-share subsets at
/// `t = step, 2·step, …, 100`. Records without a group share are ignored.
pub fn cumulative_group_sweep(
    records: &[BlockGroupRecord],
    scores: &[f64],
    group: Group,
    step: u32,
    direction: SweepDirection,
) -> Result<Vec<SweepPoint>> {
    if step == 0 || 100 % step != 0 {
        return Err(Error::InvalidInput(format!("sweep step {step} must divide 100")));
    }
    if records.len() != scores.len() {
        return Err(Error::InvalidInput("records and scores differ in length".into()));
    }
    let rows: Vec<(f64, f64, f64)> = records
        .iter()
        .zip(scores)
        .filter_map(|(r, s)| group.share(r).map(|g| (g, *s, r.population as f64)))
        .collect();
    let total_pop = pairwise_sum(&rows.iter().map(|r| r.2).collect::<Vec<_>>());

    let mut out = Vec::new();
    for k in 1..=100 / step {
        let t = f64::from(k * step);
        let keep = |share: f64| match direction {
            SweepDirection::Concentrating => share >= 100.0 - t,
            SweepDirection::Diluting => share <= t,
        };
        let subset: Vec<&(f64, f64, f64)> = rows.iter().filter(|r| keep(r.0)).collect();
        let sub_scores: Vec<f64> = subset.iter().map(|r| r.1).collect();
        let pop = pairwise_sum(&subset.iter().map(|r| r.2).collect::<Vec<_>>());
        let stats = summary_stats(&sub_scores).ok();
        out.push(SweepPoint {
            threshold: t,
            n: subset.len(),
            median: stats.map(|s| s.median),
            sd: stats.map(|s| s.sd),
            population_share: if total_pop > 0.0 { pop / total_pop } else { 0.0 },
        });
    }
    Ok(out)
}
