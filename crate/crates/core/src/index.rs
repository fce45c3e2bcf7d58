//! Deprivation index: weighting schemes, raw scores and [0, 100] rescaling.
//!
//! The raw score of a block group is the weighted sum of its poverty,
//! vacancy, unemployment and no-diploma rates. Weights are either the
//! reciprocals of each variable's standard deviation or the absolute
//! first-principal-component loadings of the correlation matrix.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::model::{BlockGroupRecord, Geoid, WeightScheme, WeightVector, COMPONENTS};
use crate::stats::pearson_corr;

/// Population-form (÷n) standard deviations in [`COMPONENTS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdStats {
    pub sds: [f64; 4],
    pub n: usize,
}

fn weighting_sample(records: &[BlockGroupRecord]) -> Vec<[f64; 4]> {
    records
        .iter()
        .filter(|r| !r.zero_pop())
        .map(BlockGroupRecord::components)
        .collect()
}

fn check_not_constant(xs: &[[f64; 4]]) -> Result<()> {
    for (k, name) in COMPONENTS.iter().enumerate() {
        let first = xs[0][k];
        if xs.iter().all(|x| x[k] == first) {
            return Err(Error::DegenerateVariance((*name).to_owned()));
        }
    }
    Ok(())
}

fn means(xs: &[[f64; 4]], exec: Execution) -> [f64; 4] {
    let n = xs.len() as f64;
    std::array::from_fn(|k| exec.sum_by(xs, |x| x[k]) / n)
}

/// Standard deviations over records with non-zero population.
pub fn compute_sd_stats(records: &[BlockGroupRecord], exec: Execution) -> Result<SdStats> {
    let xs = weighting_sample(records);
    if xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 populated block groups, got {}",
            xs.len()
        )));
    }
    check_not_constant(&xs)?;
    let n = xs.len() as f64;
    let mean = means(&xs, exec);
    let sds = std::array::from_fn(|k| {
        (exec.sum_by(&xs, |x| (x[k] - mean[k]).powi(2)) / n).sqrt()
    });
    Ok(SdStats { sds, n: xs.len() })
}

pub fn sd_weights(stats: &SdStats) -> WeightVector {
    WeightVector {
        w: stats.sds.map(|s| 1.0 / s),
        scheme: WeightScheme::InverseSD,
        source_sds: Some(stats.sds),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// First-component loadings, unit norm, percpov loading ≥ 0.
    pub loadings: [f64; 4],
    /// λ₁ / Σλ.
    pub explained_share: f64,
    pub sign_flipped: bool,
    /// Descending.
    pub eigenvalues: [f64; 4],
    /// λ₁ ≈ λ₂, so the leading eigenvector is not unique.
    pub degenerate_eigenspace: bool,
}

impl PcaResult {
    /// Index weights are the absolute loadings, which keeps them non-negative
    /// whatever signs the remaining loadings take.
    pub fn weights(&self) -> WeightVector {
        WeightVector {
            w: self.loadings.map(f64::abs),
            scheme: WeightScheme::PCA,
            source_sds: None,
        }
    }
}

/// Pearson correlation matrix of the four components.
pub fn correlation_matrix(records: &[BlockGroupRecord], exec: Execution) -> Result<Matrix> {
    let xs = weighting_sample(records);
    if xs.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 populated block groups".into()));
    }
    correlation_of(&xs, exec)
}

fn correlation_of(xs: &[[f64; 4]], exec: Execution) -> Result<Matrix> {
    check_not_constant(xs)?;
    let n = xs.len() as f64;
    let mean = means(xs, exec);
    let sd: [f64; 4] =
        std::array::from_fn(|k| (exec.sum_by(xs, |x| (x[k] - mean[k]).powi(2)) / n).sqrt());
    let mut c = Matrix::zeros(4, 4);
    for j in 0..4 {
        c[(j, j)] = 1.0;
        for k in j + 1..4 {
            let s = exec.sum_by(xs, |x| (x[j] - mean[j]) * (x[k] - mean[k])) / n;
            let r = s / (sd[j] * sd[k]);
            c[(j, k)] = r;
            c[(k, j)] = r;
        }
    }
    Ok(c)
}

const EIGENSPACE_TOL: f64 = 1e-8;

pub fn pca_weights(records: &[BlockGroupRecord], exec: Execution) -> Result<PcaResult> {
    let xs = weighting_sample(records);
    if xs.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least 5 populated block groups, got {}",
            xs.len()
        )));
    }
    pca_from_correlation(&correlation_of(&xs, exec)?)
}

/// Leading eigenvector of a 4×4 correlation matrix.
pub fn pca_from_correlation(corr: &Matrix) -> Result<PcaResult> {
    let eig = symmetric_eigen(corr)?;
    let mut loadings: [f64; 4] = std::array::from_fn(|k| eig.vectors[0][k]);
    let norm = loadings.iter().map(|v| v * v).sum::<f64>().sqrt();
    loadings.iter_mut().for_each(|v| *v /= norm);
    let sign_flipped = loadings[0] < 0.0;
    if sign_flipped {
        loadings.iter_mut().for_each(|v| *v = -*v);
    }
    let eigenvalues: [f64; 4] = std::array::from_fn(|k| eig.values[k]);
    let total: f64 = eigenvalues.iter().sum();
    let degenerate_eigenspace =
        eigenvalues[0] - eigenvalues[1] <= EIGENSPACE_TOL * eigenvalues[0].abs().max(1.0);
    if degenerate_eigenspace {
        log::warn!("DEGENERATE_EIGENSPACE: leading eigenvalues {eigenvalues:?} coincide");
    }
    Ok(PcaResult {
        loadings,
        explained_share: eigenvalues[0] / total,
        sign_flipped,
        eigenvalues,
        degenerate_eigenspace,
    })
}

/// Σ w[k]·x[k], accumulated left to right.
pub fn raw_score(x: &[f64; 4], weights: &WeightVector) -> f64 {
    x.iter().zip(&weights.w).fold(0.0, |acc, (x, w)| acc + w * x)
}

/// Raw scores ordered by geoid.
pub fn raw_scores(
    records: &[BlockGroupRecord],
    weights: &WeightVector,
    exec: Execution,
) -> Vec<(Geoid, f64)> {
    let mut out = exec.map(records, |r| (r.geoid.clone(), raw_score(&r.components(), weights)));
    if !out.windows(2).all(|w| w[0].0 <= w[1].0) {
        out.sort_by(|a, b| a.0.cmp(&b.0));
    }
    out
}

/// Same formula applied to one place-level record.
pub fn place_level_score(x: &[f64; 4], weights: &WeightVector) -> f64 {
    raw_score(x, weights)
}

/// Linear min-max map onto [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescaling {
    pub raw_min: f64,
    pub raw_max: f64,
}

impl Rescaling {
    pub fn new(raw_min: f64, raw_max: f64) -> Result<Self> {
        if !(raw_max > raw_min) || !raw_min.is_finite() || !raw_max.is_finite() {
            return Err(Error::DegenerateRange);
        }
        Ok(Rescaling { raw_min, raw_max })
    }

    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.raw_min) / (self.raw_max - self.raw_min) * 100.0
    }
}

pub fn rescale_0_100(scores: &[f64]) -> Result<(Vec<f64>, Rescaling)> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r = Rescaling::new(min, max)?;
    Ok((scores.iter().map(|&s| r.apply(s)).collect(), r))
}

/// Inverse-SD weights restricted to one city's block groups.
pub fn city_local_weights(records: &[BlockGroupRecord]) -> Result<WeightVector> {
    Ok(sd_weights(&compute_sd_stats(records, Execution::Sequential)?))
}

/// Per-city local weights; cities whose variance degenerates are skipped and
/// returned alongside the error that excluded them.
pub fn city_local_weights_all(
    cities: &BTreeMap<String, Vec<&BlockGroupRecord>>,
    exec: Execution,
) -> (BTreeMap<String, WeightVector>, Vec<(String, Error)>) {
    let entries: Vec<(&String, &Vec<&BlockGroupRecord>)> = cities.iter().collect();
    let results = exec.map(&entries, |(id, members)| {
        let owned: Vec<BlockGroupRecord> = members.iter().map(|r| (*r).clone()).collect();
        ((*id).clone(), city_local_weights(&owned))
    });
    let mut ok = BTreeMap::new();
    let mut skipped = Vec::new();
    for (id, res) in results {
        match res {
            Ok(w) => {
                ok.insert(id, w);
            }
            Err(e) => {
                log::warn!("city {id} excluded from local weighting: {e}");
                skipped.push((id, e));
            }
        }
    }
    (ok, skipped)
}

/// One city's score under the three weighting variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityVariants {
    pub city_id: String,
    /// Median block-group score with the city's own inverse-SD weights.
    pub city_weights: f64,
    /// Median block-group score with national weights.
    pub national_weights: f64,
    /// Single score computed from place-level data with national weights.
    pub place_level: f64,
}

pub const VARIANT_NAMES: [&str; 3] = ["city_weights", "national_weights", "place_level"];

pub fn variant_correlations(cities: &[CityVariants]) -> Result<[[f64; 3]; 3]> {
    if cities.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "variant comparison needs at least 3 cities, got {}",
            cities.len()
        )));
    }
    let cols: [Vec<f64>; 3] = [
        cities.iter().map(|c| c.city_weights).collect(),
        cities.iter().map(|c| c.national_weights).collect(),
        cities.iter().map(|c| c.place_level).collect(),
    ];
    let mut m = [[1.0; 3]; 3];
    for i in 0..3 {
        for j in i + 1..3 {
            let r = pearson_corr(&cols[i], &cols[j]).map_err(|e| match e {
                Error::DegenerateVariance(_) => {
                    let name = if is_constant(&cols[i]) { i } else { j };
                    Error::DegenerateVariance(VARIANT_NAMES[name].to_owned())
                }
                other => other,
            })?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// Persisted weights plus the rescaling constants of the scoring run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightFile {
    pub scheme: WeightScheme,
    pub weights: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_sds: Option<[f64; 4]>,
    pub rescale: Rescaling,
}

impl WeightFile {
    pub fn new(weights: &WeightVector, rescale: Rescaling) -> Self {
        WeightFile {
            scheme: weights.scheme,
            weights: weights.w,
            source_sds: weights.source_sds,
            rescale,
        }
    }

    pub fn weight_vector(&self) -> Result<WeightVector> {
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(format!(
                "weight file has invalid weights {:?}",
                self.weights
            )));
        }
        Ok(WeightVector {
            w: self.weights,
            scheme: self.scheme,
            source_sds: self.source_sds,
        })
    }
}
