//! Least squares with heteroskedasticity-consistent covariance.

use serde::{Deserialize, Serialize};

use super::{t_two_sided, DesignMatrix};
use crate::linalg::{symmetrize, Matrix, Qr};
use crate::model::{ModelKind, RegressionFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RobustKind {
    HC0,
    /// HC0 scaled by n / (n − p).
    #[default]
    HC1,
}

/// Sandwich estimator `(X'X)⁻¹ X' diag(e²) X (X'X)⁻¹`, optionally
/// degrees-of-freedom corrected.
pub fn robust_covariance(x: &Matrix, residuals: &[f64], bread: &Matrix, kind: RobustKind) -> Matrix {
    let (n, p) = (x.rows(), x.cols());
    let mut meat = Matrix::zeros(p, p);
    for i in 0..n {
        let row = x.row(i);
        let e2 = residuals[i] * residuals[i];
        for a in 0..p {
            for b in a..p {
                meat[(a, b)] += e2 * row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            meat[(a, b)] = meat[(b, a)];
        }
    }
    let mut cov = bread.matmul(&meat).matmul(bread);
    if kind == RobustKind::HC1 {
        cov.scale(n as f64 / (n - p) as f64);
    }
    symmetrize(&mut cov);
    cov
}

pub fn ols_fit(d: &DesignMatrix, kind: RobustKind) -> RegressionFit {
    let (n, p) = (d.n(), d.p());
    let qr = Qr::new(d.x());
    let coef = qr.solve(d.y());
    let fitted = d.x().matvec(&coef);
    let residuals: Vec<f64> = d.y().iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let bread = qr.inverse_gram();
    let cov = robust_covariance(d.x(), &residuals, &bread, kind);

    let df = (n - p) as f64;
    let se: Vec<f64> = (0..p).map(|k| cov[(k, k)].max(0.0).sqrt()).collect();
    let p_values = coef
        .iter()
        .zip(&se)
        .map(|(b, s)| coefficient_p_value(*b, *s, |t| t_two_sided(t, df)))
        .collect();

    let mean_y = d.y().iter().sum::<f64>() / n as f64;
    let sst: f64 = d.y().iter().map(|y| (y - mean_y).powi(2)).sum();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let r2 = if sst == 0.0 { 0.0 } else { 1.0 - ssr / sst };
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df;

    let mut warnings = Vec::new();
    if sst == 0.0 {
        warnings.push("ZERO_SST: constant response, R² set to 0".to_owned());
    }
    RegressionFit {
        model: ModelKind::OLS,
        names: d.names().to_vec(),
        coef,
        cov: cov.to_rows(),
        se,
        p_values,
        r2,
        adj_r2: Some(adj_r2),
        n_obs: n,
        converged: true,
        iterations: 1,
        warnings,
    }
}

/// A zero standard error only arises from an exact fit: p = 0 for a
/// non-zero coefficient and 1 for a zero one.
pub(crate) fn coefficient_p_value(coef: f64, se: f64, tail: impl Fn(f64) -> f64) -> f64 {
    if se > 0.0 {
        tail(coef / se)
    } else if coef == 0.0 {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn noiseless_line() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let d = DesignMatrix::with_intercept(y, &[x], &["x"]).unwrap();
        let f = ols_fit(&d, RobustKind::HC1);
        assert_relative_eq!(f.coef[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(f.coef[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_response_has_zero_r2() {
        let x: Vec<f64> = (1..=6).map(f64::from).collect();
        let d = DesignMatrix::with_intercept(vec![4.2; 6], &[x], &["x"]).unwrap();
        let f = ols_fit(&d, RobustKind::HC1);
        assert_relative_eq!(f.coef[0], 4.2, epsilon = 1e-12);
        assert!(f.coef[1].abs() < 1e-12);
        assert_eq!(f.r2, 0.0);
        assert!(f.warnings[0].starts_with("ZERO_SST"));
    }

    #[test]
    fn five_point_fixture() {
        // ȳ = 3.6, x̄ = 3, Sxy = Sxx = 10 ⇒ β̂ = (0.6, 1.0); residuals
        // (0.4, −0.6, 0.4, −0.6, 0.4); (X'X)⁻¹ = [[1.1, −0.3], [−0.3, 0.1]];
        // meat = [[1.2, 3.6], [3.6, 12.8]]; HC0 = [[0.228, −0.06], [−0.06, 0.02]];
        // HC1 = 5/3 · HC0.
        let d = DesignMatrix::with_intercept(
            vec![2.0, 2.0, 4.0, 4.0, 6.0],
            &[vec![1.0, 2.0, 3.0, 4.0, 5.0]],
            &["x"],
        )
        .unwrap();
        let f = ols_fit(&d, RobustKind::HC1);
        assert_relative_eq!(f.coef[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(f.coef[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.cov[0][0], 0.38, epsilon = 1e-12);
        assert_relative_eq!(f.cov[0][1], -0.1, epsilon = 1e-12);
        assert_relative_eq!(f.cov[1][1], 1.0 / 30.0, epsilon = 1e-12);
        let f0 = ols_fit(&d, RobustKind::HC0);
        assert_relative_eq!(f0.cov[0][0], 0.228, epsilon = 1e-12);
        // R² = 1 − 1.2 / 11.2
        assert_relative_eq!(f.r2, 1.0 - 1.2 / 11.2, epsilon = 1e-12);
    }
}
