//! Small dense linear algebra: just enough for 4×4 PCA and p ≤ 5 regressions.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub const JACOBI_MAX_SWEEPS: usize = 10_000;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale: f64 = a.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !scale.is_finite() {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }

    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale || off == 0.0 {
            break;
        }
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(JACOBI_MAX_SWEEPS));
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                if s == 0.0 {
                    continue;
                }
                rotated = true;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    Ok(SymmetricEigen {
        values: order.iter().map(|&i| m[(i, i)]).collect(),
        vectors: order.iter().map(|&i| v.column(i)).collect(),
        sweeps,
    })
}

/// Householder QR of an `n × p` matrix, `n ≥ p`.
#[derive(Debug, Clone)]
pub struct Qr {
    /// Householder vectors below the diagonal, R on and above.
    qr: Matrix,
    rdiag: Vec<f64>,
}

impl Qr {
    pub fn new(a: &Matrix) -> Self {
        let (n, p) = (a.rows(), a.cols());
        let mut qr = a.clone();
        let mut rdiag = vec![0.0; p];
        for k in 0..p {
            let norm = (k..n).map(|i| qr[(i, k)].powi(2)).sum::<f64>().sqrt();
            if norm == 0.0 {
                rdiag[k] = 0.0;
                continue;
            }
            let norm = if qr[(k, k)] < 0.0 { -norm } else { norm };
            for i in k..n {
                qr[(i, k)] /= norm;
            }
            qr[(k, k)] += 1.0;
            for j in k + 1..p {
                let s: f64 = (k..n).map(|i| qr[(i, k)] * qr[(i, j)]).sum::<f64>() / qr[(k, k)];
                for i in k..n {
                    let h = qr[(i, k)];
                    qr[(i, j)] -= s * h;
                }
            }
            rdiag[k] = -norm;
        }
        Qr { qr, rdiag }
    }

    pub fn r_diagonal(&self) -> &[f64] {
        &self.rdiag
    }

    pub fn r(&self) -> Matrix {
        let p = self.qr.cols();
        let mut r = Matrix::zeros(p, p);
        for i in 0..p {
            r[(i, i)] = self.rdiag[i];
            for j in i + 1..p {
                r[(i, j)] = self.qr[(i, j)];
            }
        }
        r
    }

    /// Least-squares solution of `A x ≈ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, p) = (self.qr.rows(), self.qr.cols());
        let mut y = b.to_vec();
        for k in 0..p {
            if self.qr[(k, k)] == 0.0 {
                continue;
            }
            let s: f64 = (k..n).map(|i| self.qr[(i, k)] * y[i]).sum::<f64>() / self.qr[(k, k)];
            for (i, yi) in y.iter_mut().enumerate().take(n).skip(k) {
                *yi -= s * self.qr[(i, k)];
            }
        }
        let mut x = vec![0.0; p];
        for k in (0..p).rev() {
            let mut s = y[k];
            for j in k + 1..p {
                s -= self.qr[(k, j)] * x[j];
            }
            x[k] = s / self.rdiag[k];
        }
        x
    }

    /// `(AᵀA)⁻¹ = R⁻¹ R⁻ᵀ`.
    pub fn inverse_gram(&self) -> Matrix {
        let rinv = upper_triangular_inverse(&self.r());
        rinv.matmul(&rinv.transpose())
    }
}

fn upper_triangular_inverse(r: &Matrix) -> Matrix {
    let p = r.rows();
    let mut inv = Matrix::zeros(p, p);
    for j in 0..p {
        inv[(j, j)] = 1.0 / r[(j, j)];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| r[(i, k)] * inv[(k, j)]).sum();
            inv[(i, j)] = -s / r[(i, i)];
        }
    }
    inv
}

/// Cholesky factor `L` of a symmetric positive-definite matrix.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = a[(j, j)] - (0..j).map(|k| l[(j, k)].powi(2)).sum::<f64>();
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let s = a[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * x[k]).sum();
        x[i] = (y[i] - s) / l[(i, i)];
    }
    x
}

pub fn cholesky_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = cholesky_solve(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    symmetrize(&mut inv);
    inv
}

pub fn symmetrize(m: &mut Matrix) {
    let n = m.rows();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Thin SVD by one-sided (Hestenes) Jacobi. Singular values are accurate to
/// working precision relative to the largest, unlike those of `AᵀA`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Descending.
    pub values: Vec<f64>,
    /// `vectors[k]` is the right singular vector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

pub fn svd(a: &Matrix) -> Result<Svd> {
    let (n, p) = (a.rows(), a.cols());
    let mut u = a.clone();
    let mut v = Matrix::identity(p);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..n {
                    alpha += u[(k, i)] * u[(k, i)];
                    beta += u[(k, j)] * u[(k, j)];
                    gamma += u[(k, i)] * u[(k, j)];
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let (x, y) = (u[(k, i)], u[(k, j)]);
                    u[(k, i)] = c * x - s * y;
                    u[(k, j)] = s * x + c * y;
                }
                for k in 0..p {
                    let (x, y) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * x - s * y;
                    v[(k, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            let mut order: Vec<(f64, usize)> = (0..p)
                .map(|j| ((0..n).map(|k| u[(k, j)] * u[(k, j)]).sum::<f64>().sqrt(), j))
                .collect();
            order.sort_by(|a, b| b.0.total_cmp(&a.0));
            return Ok(Svd {
                values: order.iter().map(|o| o.0).collect(),
                vectors: order.iter().map(|o| v.column(o.1)).collect(),
            });
        }
    }
    Err(Error::NoConvergence(JACOBI_MAX_SWEEPS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_diagonal_is_already_converged() {
        let a = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 5.0]]);
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.values, vec![5.0, 3.0]);
        assert_eq!(e.sweeps, 0);
    }

    #[test]
    fn jacobi_two_by_two() {
        // eigenvalues 3 and 1, vectors (1,1)/√2 and (1,-1)/√2
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = symmetric_eigen(&a).unwrap();
        assert_relative_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let v = &e.vectors[0];
        assert_relative_eq!(v[0].abs(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
        assert_relative_eq!(v[0], v[1], epsilon = 1e-14);
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, -2.0, 0.5],
            vec![1.0, 3.0, 0.0, 1.5],
            vec![-2.0, 0.0, 5.0, -1.0],
            vec![0.5, 1.5, -1.0, 2.0],
        ]);
        let e = symmetric_eigen(&a).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..4)
                    .map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j])
                    .sum();
                assert_relative_eq!(s, a[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn qr_solves_exact_system() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]);
        let qr = Qr::new(&a);
        let x = qr.solve(&[5.0, 7.0, 9.0]);
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-13);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-13);
        let g = qr.inverse_gram();
        // XᵀX = [[3,6],[6,14]], inverse = [[14,-6],[-6,3]]/6
        assert_relative_eq!(g[(0, 0)], 14.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(g[(0, 1)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(g[(1, 1)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_round_trip() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let l = cholesky(&a).unwrap();
        let inv = cholesky_inverse(&l);
        let id = a.matmul(&inv);
        assert_relative_eq!(id[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(id[(0, 1)], 0.0, epsilon = 1e-14);
        assert!(cholesky(&Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]])).is_none());
    }

    #[test]
    fn svd_of_rank_deficient_matrix() {
        let a = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 9.0],
            vec![7.0, 8.0, 15.0],
            vec![1.0, 0.0, 1.0],
        ]);
        let d = svd(&a).unwrap();
        assert!(d.values[2] < 1e-14, "{:?}", d.values);
        let v = &d.vectors[2];
        let av = a.matvec(v);
        assert!(av.iter().all(|x| x.abs() < 1e-13));
        // singular values squared are the eigenvalues of AᵀA
        let eig = symmetric_eigen(&a.transpose().matmul(&a)).unwrap();
        for k in 0..2 {
            assert!((d.values[k].powi(2) - eig.values[k]).abs() < 1e-9 * eig.values[0]);
        }
    }
}
