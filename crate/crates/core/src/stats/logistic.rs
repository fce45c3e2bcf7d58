//! Binary logistic regression by iteratively reweighted least squares.

use super::ols::coefficient_p_value;
use super::{normal_two_sided, DesignMatrix};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_inverse, cholesky_solve, Matrix};
use crate::model::{ModelKind, RegressionFit};

#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions {
    pub tolerance: f64,
    pub max_iter: usize,
    /// Any |β| beyond this is treated as separation.
    pub divergence_bound: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            tolerance: 1e-10,
            max_iter: 100,
            divergence_bound: 30.0,
        }
    }
}

/// `log(1 + e^η)` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Σ yᵢηᵢ − log(1 + e^ηᵢ).
pub fn log_likelihood(x: &Matrix, y: &[f64], beta: &[f64]) -> f64 {
    x.matvec(beta)
        .iter()
        .zip(y)
        .map(|(eta, yi)| yi * eta - softplus(*eta))
        .sum()
}

/// Gradient of [`log_likelihood`]: X'(y − p̂).
pub fn score_vector(x: &Matrix, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let resid: Vec<f64> = x
        .matvec(beta)
        .iter()
        .zip(y)
        .map(|(eta, yi)| yi - sigmoid(*eta))
        .collect();
    x.transpose().matvec(&resid)
}

/// Observed information X' diag(p̂(1 − p̂)) X.
pub fn information(x: &Matrix, beta: &[f64]) -> Matrix {
    let (n, p) = (x.rows(), x.cols());
    let eta = x.matvec(beta);
    let mut h = Matrix::zeros(p, p);
    for i in 0..n {
        let pi = sigmoid(eta[i]);
        let w = pi * (1.0 - pi);
        let row = x.row(i);
        for a in 0..p {
            for b in a..p {
                h[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    h
}

pub fn logistic_fit(d: &DesignMatrix, opts: LogisticOptions) -> Result<RegressionFit> {
    let y = d.y();
    if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::InvalidInput("logistic response must be 0/1".into()));
    }
    let ones = y.iter().filter(|v| **v == 1.0).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::BothClassesRequired);
    }
    let (n, p) = (d.n(), d.p());
    let x = d.x();

    let mut beta = vec![0.0; p];
    let mut ll = log_likelihood(x, y, &beta);
    let mut converged = false;
    let mut separated = false;
    let mut iterations = 0;
    let mut warnings = Vec::new();

    while iterations < opts.max_iter {
        iterations += 1;
        let grad = score_vector(x, y, &beta);
        let Some(l) = cholesky(&information(x, &beta)) else {
            separated = true;
            break;
        };
        let step = cholesky_solve(&l, &grad);
        // Newton step, halved while the likelihood falls.
        let mut scale = 1.0;
        let mut candidate: Vec<f64>;
        let mut cand_ll;
        loop {
            candidate = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            cand_ll = log_likelihood(x, y, &candidate);
            if cand_ll >= ll - 1e-12 * ll.abs() || scale < 1e-6 {
                break;
            }
            scale *= 0.5;
        }
        let max_change = beta
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = candidate;
        ll = cand_ll;
        if beta.iter().any(|b| b.abs() > opts.divergence_bound) {
            separated = true;
            break;
        }
        if max_change < opts.tolerance {
            converged = true;
            break;
        }
    }
    if separated {
        warnings.push("SEPARATION: coefficients diverge; complete or quasi-complete separation".into());
    } else if !converged {
        warnings.push(format!("NOT_CONVERGED after {iterations} iterations"));
    }

    let cov = match cholesky(&information(x, &beta)) {
        Some(l) => cholesky_inverse(&l),
        None => {
            warnings.push("SINGULAR_INFORMATION: covariance unavailable".into());
            let mut m = Matrix::zeros(p, p);
            for k in 0..p {
                m[(k, k)] = f64::INFINITY;
            }
            m
        }
    };
    let se: Vec<f64> = (0..p).map(|k| cov[(k, k)].max(0.0).sqrt()).collect();
    let p_values = beta
        .iter()
        .zip(&se)
        .map(|(b, s)| coefficient_p_value(*b, *s, normal_two_sided))
        .collect();

    let ybar = ones as f64 / n as f64;
    let ll_null = n as f64 * (ybar * ybar.ln() + (1.0 - ybar) * (1.0 - ybar).ln());
    let r2 = 1.0 - ll / ll_null;

    Ok(RegressionFit {
        model: ModelKind::Logistic,
        names: d.names().to_vec(),
        coef: beta,
        cov: cov.to_rows(),
        se,
        p_values,
        r2,
        adj_r2: None,
        n_obs: n,
        converged: converged && !separated,
        iterations,
        warnings,
    })
}
