//! Dense textbook matrix arithmetic for checking the regression code.

pub fn dense(rows: usize, cols: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; cols]; rows]
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = dense(a.len(), b[0].len());
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Gauss–Jordan with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                let pivot = m[c].clone();
                m[r].iter_mut().zip(&pivot).for_each(|(v, pv)| *v -= f * pv);
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn with_intercept(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..cols[0].len())
        .map(|i| std::iter::once(1.0).chain(cols.iter().map(|c| c[i])).collect())
        .collect()
}

/// OLS coefficients and the HC1 sandwich `n/(n−p) (X'X)⁻¹ X' diag(e²) X (X'X)⁻¹`.
pub fn ols_hc1(cols: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = y.len();
    let x = with_intercept(cols);
    let p = x[0].len();
    let xt = transpose(&x);
    let bread = invert(&matmul(&xt, &x));
    let ycol: Vec<Vec<f64>> = y.iter().map(|v| vec![*v]).collect();
    let beta: Vec<f64> = matmul(&bread, &matmul(&xt, &ycol)).into_iter().map(|r| r[0]).collect();
    let mut omega = dense(n, n);
    for i in 0..n {
        let fitted: f64 = (0..p).map(|k| x[i][k] * beta[k]).sum();
        omega[i][i] = (y[i] - fitted).powi(2);
    }
    let meat = matmul(&matmul(&xt, &omega), &x);
    let mut cov = matmul(&matmul(&bread, &meat), &bread);
    let scale = n as f64 / (n - p) as f64;
    cov.iter_mut().flatten().for_each(|v| *v *= scale);
    (beta, cov)
}
