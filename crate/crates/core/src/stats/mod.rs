//! Regression fits and the distribution functions behind their p-values.

mod dist;
pub mod logistic;
pub mod ols;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix};
use crate::model::RegionSummary;

pub use dist::{normal_two_sided, regularized_incomplete_beta, t_two_sided};
pub use logistic::{information, log_likelihood, logistic_fit, score_vector, LogisticOptions};
pub use ols::{ols_fit, RobustKind};

/// Two-sided p-value; `df = None` selects the normal reference.
pub fn tail_probability(stat: f64, df: Option<f64>) -> f64 {
    match df {
        None => normal_two_sided(stat),
        Some(df) => t_two_sided(stat, df),
    }
}

/// Minimum singular value of the centered, scaled design.
pub const RANK_TOL: f64 = 1e-10;

/// Response vector and regressors; column 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    y: Vec<f64>,
    x: Matrix,
    names: Vec<String>,
}

impl DesignMatrix {
    /// `columns` excludes the intercept, which is prepended.
    pub fn with_intercept(y: Vec<f64>, columns: &[Vec<f64>], names: &[&str]) -> Result<Self> {
        let n = y.len();
        if columns.len() != names.len() || columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("design column lengths disagree".into()));
        }
        let p = columns.len() + 1;
        let mut data = Vec::with_capacity(n * p);
        for i in 0..n {
            data.push(1.0);
            data.extend(columns.iter().map(|c| c[i]));
        }
        let mut all_names = vec!["intercept".to_owned()];
        all_names.extend(names.iter().map(|s| s.to_string()));
        Self::new(y, Matrix::from_row_major(n, p, data), all_names)
    }

    pub fn new(y: Vec<f64>, x: Matrix, names: Vec<String>) -> Result<Self> {
        let (n, p) = (x.rows(), x.cols());
        if y.len() != n || names.len() != p || p == 0 {
            return Err(Error::InvalidInput("design shape mismatch".into()));
        }
        if n <= p {
            return Err(Error::InvalidInput(format!(
                "design needs more observations than columns (n = {n}, p = {p})"
            )));
        }
        if y.iter().any(|v| !v.is_finite()) || (0..n).any(|i| x.row(i).iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidInput("design contains non-finite values".into()));
        }
        if (0..n).any(|i| x[(i, 0)] != 1.0) {
            return Err(Error::InvalidInput("column 0 must be the intercept".into()));
        }
        let d = DesignMatrix { y, x, names };
        d.check_rank()?;
        Ok(d)
    }

    fn check_rank(&self) -> Result<()> {
        let (n, p) = (self.x.rows(), self.x.cols());
        let mut z = Matrix::zeros(n, p);
        let inv_sqrt_n = 1.0 / (n as f64).sqrt();
        for i in 0..n {
            z[(i, 0)] = inv_sqrt_n;
        }
        for j in 1..p {
            let col = self.x.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let norm = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(Error::SingularDesign(self.names[j].clone()));
            }
            for i in 0..n {
                z[(i, j)] = (col[i] - mean) / norm;
            }
        }
        let eig = svd(&z)?;
        let last = p - 1;
        let smallest = eig.values[last];
        if smallest <= RANK_TOL {
            let v = &eig.vectors[last];
            let worst = (1..p)
                .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
                .unwrap_or(0);
            return Err(Error::SingularDesign(self.names[worst].clone()));
        }
        Ok(())
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }
}

/// Product-moment correlation.
pub fn pearson_corr(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "correlation needs two equal-length vectors of at least 3 (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if a.iter().all(|v| *v == a[0]) {
        return Err(Error::DegenerateVariance("a".into()));
    }
    if b.iter().all(|v| *v == b[0]) {
        return Err(Error::DegenerateVariance("b".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    Percpov,
    LogPopdens,
    Percblk,
    Percwht,
}

impl Covariate {
    pub fn label(&self) -> &'static str {
        match self {
            Covariate::Percpov => "percpov",
            Covariate::LogPopdens => "log(popdens)",
            Covariate::Percblk => "percblk",
            Covariate::Percwht => "percwht",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Response {
    /// 1 when %HD > 0.
    HdPositive,
    /// %HD in percent units.
    PctHd,
    Dispersion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DropReason {
    MissingValue,
    LogDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRegion {
    pub region_id: String,
    pub reason: DropReason,
    pub field: String,
}

#[derive(Debug, Clone)]
pub struct DesignBuild {
    pub design: DesignMatrix,
    pub region_ids: Vec<String>,
    pub dropped: Vec<DroppedRegion>,
}

/// Assemble a regression design from region summaries. Regions with absent
/// values, or non-positive density under the log, are dropped and reported.
pub fn build_design(
    regions: &[RegionSummary],
    covariates: &[Covariate],
    response: Response,
) -> Result<DesignBuild> {
    let mut ys = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); covariates.len()];
    let mut ids = Vec::new();
    let mut dropped = Vec::new();

    'regions: for r in regions {
        let y = match response {
            Response::HdPositive => Some(if r.pct_high > 0.0 { 1.0 } else { 0.0 }),
            Response::PctHd => Some(r.pct_high),
            Response::Dispersion => r.dispersion,
        };
        let Some(y) = y else {
            dropped.push(DroppedRegion {
                region_id: r.region_id.clone(),
                reason: DropReason::MissingValue,
                field: "dispersion".into(),
            });
            continue;
        };
        let mut row = Vec::with_capacity(covariates.len());
        for c in covariates {
            let value = match c {
                Covariate::Percpov => r.percpov,
                Covariate::LogPopdens => match r.popdens {
                    Some(d) if d > 0.0 => Some(d.ln()),
                    Some(_) => {
                        log::info!("region {} dropped: LOG_DOMAIN", r.region_id);
                        dropped.push(DroppedRegion {
                            region_id: r.region_id.clone(),
                            reason: DropReason::LogDomain,
                            field: "popdens".into(),
                        });
                        continue 'regions;
                    }
                    None => None,
                },
                Covariate::Percblk => r.percblk,
                Covariate::Percwht => r.percwht,
            };
            match value {
                Some(v) => row.push(v),
                None => {
                    dropped.push(DroppedRegion {
                        region_id: r.region_id.clone(),
                        reason: DropReason::MissingValue,
                        field: c.label().trim_start_matches("log(").trim_end_matches(')').into(),
                    });
                    continue 'regions;
                }
            }
        }
        ys.push(y);
        for (col, v) in cols.iter_mut().zip(row) {
            col.push(v);
        }
        ids.push(r.region_id.clone());
    }

    let names: Vec<&str> = covariates.iter().map(Covariate::label).collect();
    let design = DesignMatrix::with_intercept(ys, &cols, &names)?;
    Ok(DesignBuild {
        design,
        region_ids: ids,
        dropped,
    })
}
