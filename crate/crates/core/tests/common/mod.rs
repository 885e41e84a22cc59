#![allow(dead_code, clippy::needless_range_loop)]

use geoaffinity::synth::{generate_lattice_region, LatticeRegion, LatticeSpec};
use geoaffinity::weights::WeightsMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f7e57)
}

pub fn lattice(rows: usize, cols: usize) -> LatticeRegion {
    generate_lattice_region(&LatticeSpec::new(rows, cols)).unwrap()
}

pub fn normal_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // Box-Muller keeps the oracle side free of the library's samplers
    (0..n)
        .map(|_| {
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect()
}

pub fn dense(w: &WeightsMatrix) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; w.n]; w.n];
    for (i, row) in w.neighbors.iter().enumerate() {
        for &(j, v) in row {
            m[i][j] = v;
        }
    }
    m
}

/// I = (n / S0) * sum_ij w_ij z_i z_j / sum_i z_i^2, by explicit double sum.
pub fn moran_oracle(x: &[f64], w: &[Vec<f64>]) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let mut s0 = 0.0;
    let mut num = 0.0;
    for i in 0..n {
        for j in 0..n {
            s0 += w[i][j];
            num += w[i][j] * z[i] * z[j];
        }
    }
    let den: f64 = z.iter().map(|v| v * v).sum();
    n as f64 / s0 * num / den
}

/// Gi* z-score of tract i evaluated straight from its definition.
pub fn gi_star_oracle(x: &[f64], w: &[Vec<f64>], i: usize) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let s = (x.iter().map(|v| v * v).sum::<f64>() / n - mean * mean).sqrt();
    let wi: f64 = w[i].iter().sum();
    let wi2: f64 = w[i].iter().map(|v| v * v).sum();
    let lag: f64 = w[i].iter().zip(x).map(|(a, b)| a * b).sum();
    (lag - mean * wi) / (s * ((n * wi2 - wi * wi) / (n - 1.0)).sqrt())
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// OLS through the normal equations X'X b = X'y; `cols` excludes the intercept.
pub fn ols_oracle(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut x: Vec<Vec<f64>> = vec![vec![1.0; n]];
    x.extend(cols.iter().cloned());
    let p = x.len();
    let xtx: Vec<Vec<f64>> = (0..p).map(|a| (0..p).map(|b| (0..n).map(|i| x[a][i] * x[b][i]).sum()).collect()).collect();
    let xty: Vec<f64> = (0..p).map(|a| (0..n).map(|i| x[a][i] * y[i]).sum()).collect();
    gauss_solve(xtx, xty)
}

/// Rank-based BFS on a dense adjacency.
pub fn bfs_ball(w: &[Vec<f64>], center: usize, radius: usize) -> Vec<usize> {
    let n = w.len();
    let mut dist = vec![usize::MAX; n];
    dist[center] = 0;
    let mut frontier = vec![center];
    for step in 1..=radius {
        let mut next = Vec::new();
        for &i in &frontier {
            for j in 0..n {
                if w[i][j] > 0.0 && dist[j] == usize::MAX {
                    dist[j] = step;
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    (0..n).filter(|&i| dist[i] != usize::MAX).collect()
}

/// Study region on a lattice with the given per-tract condition values and
/// a single `poverty` indicator.
pub fn region_from(l: &LatticeRegion, prevalence: &[Vec<f64>], poverty: &[f64]) -> geoaffinity::ingest::StudyRegion {
    use geoaffinity::ingest::{join_region, AttributeTable, MissingPolicy, ValueKind};
    let k = prevalence[0].len();
    let prev = AttributeTable {
        names: (0..k).map(|c| format!("c{c}")).collect(),
        kinds: vec![ValueKind::Percent; k],
        rows: l.ids.iter().cloned().zip(prevalence.iter().map(|r| r.iter().map(|v| Some(*v)).collect())).collect(),
        ..Default::default()
    };
    let ind = AttributeTable {
        names: vec!["poverty".into()],
        kinds: vec![ValueKind::Percent],
        rows: l.ids.iter().cloned().zip(poverty.iter().map(|v| vec![Some(*v)])).collect(),
        ..Default::default()
    };
    join_region(&prev, &ind, &l.geometry_set(), MissingPolicy::Strict).unwrap()
}
