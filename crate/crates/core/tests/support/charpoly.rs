//! Leading eigenvector of a 4×4 correlation matrix via its characteristic polynomial.

use depriv_core::model::{BlockGroupRecord, Geoid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn dataset(rng: &mut ChaCha8Rng, n: usize) -> Vec<BlockGroupRecord> {
    let z = Normal::new(0.0, 1.0).unwrap();
    let strength: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.3..1.5));
    (0..n)
        .map(|i| {
            let f = z.sample(rng);
            let x: [f64; 4] = std::array::from_fn(|k| 20.0 + 8.0 * (strength[k] * f + z.sample(rng)));
            BlockGroupRecord {
                geoid: Geoid::parse(&format!("26{i:010}")).unwrap(),
                state_fips: "26".into(),
                place_id: None,
                percpov: x[0],
                percvac: x[1],
                unemp: x[2],
                nohs: x[3],
                population: 1000,
                popdens: None,
                percblk: None,
                percwht: None,
            }
        })
        .collect()
}

pub type M4 = [[f64; 4]; 4];

pub fn correlation(records: &[BlockGroupRecord]) -> M4 {
    let cols: Vec<[f64; 4]> = records.iter().map(|r| r.components()).collect();
    let n = cols.len() as f64;
    let mean: [f64; 4] = std::array::from_fn(|k| cols.iter().map(|c| c[k]).sum::<f64>() / n);
    let cov = |a: usize, b: usize| cols.iter().map(|c| (c[a] - mean[a]) * (c[b] - mean[b])).sum::<f64>();
    std::array::from_fn(|a| std::array::from_fn(|b| cov(a, b) / (cov(a, a) * cov(b, b)).sqrt()))
}

fn mul(a: &M4, b: &M4) -> M4 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..4).map(|k| a[i][k] * b[k][j]).sum()))
}

/// Coefficients c[0..=4] of det(λI − A) = Σ c[k] λ^k by Faddeev–LeVerrier.
pub fn char_poly(a: &M4) -> [f64; 5] {
    let mut c = [0.0; 5];
    c[4] = 1.0;
    let mut m = [[0.0; 4]; 4];
    for k in 1..=4 {
        let mut next = mul(a, &m);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += c[5 - k];
        }
        m = next;
        let am = mul(a, &m);
        c[4 - k] = -(0..4).map(|i| am[i][i]).sum::<f64>() / k as f64;
    }
    c
}

fn eval(c: &[f64; 5], x: f64) -> (f64, f64) {
    let p = c.iter().rev().fold(0.0, |acc, v| acc * x + v);
    let dp = (1..5).rev().fold(0.0, |acc, k| acc * x + k as f64 * c[k]);
    (p, dp)
}

/// Largest root: Newton from above converges monotonically for real-rooted polynomials.
pub fn largest_root(c: &[f64; 5]) -> f64 {
    let mut x = 4.5;
    for _ in 0..200 {
        let (p, dp) = eval(c, x);
        let next = x - p / dp;
        if next >= x {
            break;
        }
        x = next;
    }
    x
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Null vector of A − λI from the largest column of its adjugate.
pub fn eigenvector(a: &M4, lambda: f64) -> [f64; 4] {
    let b: M4 = std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] - if i == j { lambda } else { 0.0 }));
    let cofactor = |r: usize, c: usize| {
        let rows: Vec<usize> = (0..4).filter(|&i| i != r).collect();
        let cols: Vec<usize> = (0..4).filter(|&j| j != c).collect();
        let minor = std::array::from_fn(|i| std::array::from_fn(|j| b[rows[i]][cols[j]]));
        if (r + c) % 2 == 0 { det3(minor) } else { -det3(minor) }
    };
    let adj_cols: Vec<[f64; 4]> = (0..4).map(|c| std::array::from_fn(|r| cofactor(c, r))).collect();
    let best = adj_cols
        .iter()
        .max_by(|x, y| {
            let nx: f64 = x.iter().map(|v| v * v).sum();
            let ny: f64 = y.iter().map(|v| v * v).sum();
            nx.total_cmp(&ny)
        })
        .unwrap();
    let norm = best.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if best[0] < 0.0 { -1.0 } else { 1.0 };
    best.map(|v| sign * v / norm)
}
