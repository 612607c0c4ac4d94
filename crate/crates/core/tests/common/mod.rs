//! Independent reference implementations used as test oracles. Everything
//! here works on plain `Vec<Vec<f64>>` and avoids the library's solvers.
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use mknn_core::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_dense(m: &Mat<f64>) -> Dense {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn to_mat(a: &Dense) -> Mat<f64> {
    Mat::from_fn(a.len(), a[0].len(), |i, j| a[i][j])
}

pub fn identity(n: usize) -> Dense {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..m {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..p {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

pub fn max_abs_diff_mat(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    max_abs_diff(&to_dense(a), &to_dense(b))
}

/// Symmetric nonnegative weights with zero diagonal; about a third of the
/// off-diagonal pairs are zero, and a ring of positive edges keeps every
/// vertex connected.
pub fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> Dense {
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = if rng.random::<f64>() < 0.35 {
                0.0
            } else {
                rng.random_range(0.01..1.0)
            };
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    for i in 0..n {
        let j = (i + 1) % n;
        if i != j && w[i][j] == 0.0 {
            let v = rng.random_range(0.01..1.0);
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    w
}

pub fn row_normalize(w: &Dense) -> Dense {
    w.iter()
        .map(|r| {
            let d: f64 = r.iter().sum();
            r.iter().map(|v| v / d).collect()
        })
        .collect()
}

/// `sum_{t=0}^{T} (alpha P)^t` with `alpha^T < 1e-12`.
pub fn resolvent_series(p: &Dense, alpha: f64) -> Dense {
    let n = p.len();
    let terms = (1e-12f64.ln() / alpha.ln()).ceil() as usize + 1;
    let ap: Dense = p
        .iter()
        .map(|r| r.iter().map(|v| alpha * v).collect())
        .collect();
    let mut term = identity(n);
    let mut sum = identity(n);
    for _ in 0..terms {
        term = matmul(&term, &ap);
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    sum
}

/// Gauss-Jordan elimination with partial pivoting on `[a | b]`. `None` when
/// a pivot falls below `1e-12` times the largest entry of `a`.
pub fn gauss_jordan(a: &Dense, b: &Dense) -> Option<Dense> {
    let n = a.len();
    let m = b[0].len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(1e-300);
    let mut aug: Dense = a
        .iter()
        .zip(b)
        .map(|(r, s)| r.iter().chain(s).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))?;
        if aug[piv][col].abs() < 1e-12 * scale {
            return None;
        }
        aug.swap(col, piv);
        let p = aug[col][col];
        aug[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..n + m {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn inverse(a: &Dense) -> Option<Dense> {
    gauss_jordan(a, &identity(a.len()))
}

/// `(I - alpha P)^-1` by Gauss-Jordan.
pub fn resolvent(p: &Dense, alpha: f64) -> Dense {
    let n = p.len();
    let a: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 1.0 } else { 0.0 } - alpha * p[i][j])
                .collect()
        })
        .collect();
    inverse(&a).expect("nonsingular resolvent")
}

pub fn simplex_objective(target: &[f64], basis: &[Vec<f64>], z: &[f64]) -> f64 {
    (0..target.len())
        .map(|r| {
            let fit: f64 = basis.iter().zip(z).map(|(b, zj)| zj * b[r]).sum();
            (target[r] - fit).powi(2)
        })
        .sum()
}

/// Minimum of `||x - sum_j z_j b_j||^2` over the simplex by trying every
/// support: the equality-constrained problem on each subset is solved from
/// its KKT system and kept when its coefficients are nonnegative.
pub fn exhaustive_simplex_lsq(target: &[f64], basis: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let k = basis.len();
    let mut best = (f64::INFINITY, vec![0.0; k]);
    for mask in 1u32..(1 << k) {
        let s: Vec<usize> = (0..k).filter(|j| mask >> j & 1 == 1).collect();
        let m = s.len();
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut rhs = vec![vec![0.0]; m + 1];
        for (p, &i) in s.iter().enumerate() {
            for (q, &j) in s.iter().enumerate() {
                a[p][q] = 2.0 * dot(&basis[i], &basis[j]);
            }
            a[p][m] = 1.0;
            a[m][p] = 1.0;
            rhs[p][0] = 2.0 * dot(&basis[i], target);
        }
        rhs[m][0] = 1.0;
        let Some(sol) = gauss_jordan(&a, &rhs) else {
            continue;
        };
        if sol[..m].iter().any(|v| v[0] < -1e-12) {
            continue;
        }
        let mut z = vec![0.0; k];
        for (p, &i) in s.iter().enumerate() {
            z[i] = sol[p][0].max(0.0);
        }
        let total: f64 = z.iter().sum();
        z.iter_mut().for_each(|v| *v /= total);
        let obj = simplex_objective(target, basis, &z);
        if obj < best.0 {
            best = (obj, z);
        }
    }
    best
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Indices of the `k` nearest rows to `x` among `candidates`, ordered by
/// distance then index.
pub fn brute_nearest(rows: &[Vec<f64>], x: &[f64], candidates: &[usize], k: usize) -> Vec<usize> {
    let mut c: Vec<(f64, usize)> = candidates
        .iter()
        .map(|&j| (euclid(&rows[j], x), j))
        .collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    c.into_iter().take(k).map(|p| p.1).collect()
}

/// All-pairs shortest paths by Floyd-Warshall.
pub fn floyd_warshall(mut d: Dense) -> Dense {
    let n = d.len();
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][m] + d[m][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}
