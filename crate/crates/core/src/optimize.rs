//! Small constrained least-squares problems used to place a new point in the
//! neighborhood of existing ones.
//!
//! [`solve_simplex_lsq`] finds the convex combination of basis columns
//! closest to a target. Writing `a_j = b_j - x`, the residual of a convex
//! combination is `sum_j z_j a_j`, so the problem is the minimum-norm point of
//! the convex hull of the `a_j`. It is solved with Wolfe's algorithm, whose
//! working set ("corral") stays affinely independent; that keeps every
//! subproblem nonsingular even when there are more columns than dimensions.

use crate::error::{MknnError, Result};

/// Convex combination coefficients: nonnegative and summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(MknnError::param("z", "empty weight vector"));
        }
        if z.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(MknnError::param(
                "z",
                "entries must be finite and nonnegative",
            ));
        }
        let sum: f64 = z.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(MknnError::param(
                "z",
                format!("entries sum to {sum}, not 1"),
            ));
        }
        Ok(Self(z))
    }

    /// The vertex `e_j` of the simplex in `k` dimensions.
    pub fn vertex(k: usize, j: usize) -> Self {
        let mut z = vec![0.0; k];
        z[j] = 1.0;
        Self(z)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpReport {
    /// `|x - X_k z|^2` at the returned solution.
    pub objective: f64,
    /// Largest violation of the KKT conditions (stationarity, dual sign,
    /// primal feasibility).
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Indices with `z_j > 0`, ascending.
    pub active_set: Vec<usize>,
}

// Wolfe's tolerances: Z1 for the optimality test, Z2 for the positivity of
// affine coefficients.
const Z1: f64 = 1e-12;
const Z2: f64 = 1e-10;

/// Minimizes `|target - sum_j z_j basis[j]|^2` over the probability simplex.
/// `basis` holds the k columns of `X_k`, each of length d.
pub fn solve_simplex_lsq(target: &[f64], basis: &[&[f64]]) -> Result<(SimplexWeights, QpReport)> {
    let k = basis.len();
    if k == 0 {
        return Err(MknnError::param("basis", "need at least one column"));
    }
    let d = target.len();
    if let Some(col) = basis.iter().find(|c| c.len() != d) {
        return Err(MknnError::DimensionMismatch {
            expected: d,
            actual: col.len(),
        });
    }
    if target
        .iter()
        .chain(basis.iter().flat_map(|c| c.iter()))
        .any(|v| !v.is_finite())
    {
        return Err(MknnError::NonFinite("least-squares input"));
    }

    // Gram matrix of the shifted points a_j = b_j - x.
    let shifted: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| b.iter().zip(target).map(|(bi, xi)| bi - xi).collect())
        .collect();
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| dot(&shifted[i], &shifted[j])).collect())
        .collect();

    let start = (0..k)
        .min_by(|&a, &b| gram[a][a].total_cmp(&gram[b][b]).then(a.cmp(&b)))
        .expect("k >= 1");
    let mut corral = vec![start];
    let mut lambda = vec![1.0];
    let mut iterations = 0;
    let max_iterations = 100 * k + 100;

    'major: while iterations < max_iterations {
        iterations += 1;
        // <x_w, a_j> for every j, and |x_w|^2
        let inner: Vec<f64> = (0..k)
            .map(|j| {
                corral
                    .iter()
                    .zip(&lambda)
                    .map(|(&i, l)| l * gram[i][j])
                    .sum()
            })
            .collect();
        let norm2: f64 = corral.iter().zip(&lambda).map(|(&i, l)| l * inner[i]).sum();
        let entering = (0..k)
            .min_by(|&a, &b| inner[a].total_cmp(&inner[b]).then(a.cmp(&b)))
            .expect("k >= 1");
        let scale = corral
            .iter()
            .chain(std::iter::once(&entering))
            .map(|&i| gram[i][i])
            .fold(0.0f64, f64::max);
        if inner[entering] >= norm2 - Z1 * scale || corral.contains(&entering) {
            break;
        }
        corral.push(entering);
        lambda.push(0.0);

        loop {
            let Some(mu) = affine_minimizer(&gram, &corral) else {
                // Numerically dependent corral: undo the entry and stop.
                if lambda.last() == Some(&0.0) {
                    corral.pop();
                    lambda.pop();
                }
                break 'major;
            };
            if mu.iter().all(|&m| m > Z2) {
                lambda = mu;
                break;
            }
            let theta = lambda
                .iter()
                .zip(&mu)
                .filter(|(_, &m)| m <= Z2)
                .map(|(&l, &m)| if l - m > 0.0 { l / (l - m) } else { 0.0 })
                .fold(1.0f64, f64::min);
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let before = corral.len();
            let mut keep = lambda.iter().map(|&l| l > Z2);
            let kept: Vec<(usize, f64)> = corral
                .iter()
                .zip(&lambda)
                .filter(|_| keep.next().unwrap())
                .map(|(&i, &l)| (i, l))
                .collect();
            if kept.len() == before || kept.is_empty() {
                break 'major;
            }
            let total: f64 = kept.iter().map(|p| p.1).sum();
            corral = kept.iter().map(|p| p.0).collect();
            lambda = kept.iter().map(|p| p.1 / total).collect();
            iterations += 1;
        }
    }

    let mut z = vec![0.0; k];
    for (&i, &l) in corral.iter().zip(&lambda) {
        z[i] = l.max(0.0);
    }
    let total: f64 = z.iter().sum();
    z.iter_mut().for_each(|v| *v /= total);

    let residual: Vec<f64> = (0..d)
        .map(|r| basis.iter().zip(&z).map(|(b, zj)| zj * b[r]).sum::<f64>() - target[r])
        .collect();
    let objective = dot(&residual, &residual);
    let report = QpReport {
        objective,
        kkt_residual: kkt_residual(&shifted, &z, &residual),
        iterations,
        active_set: (0..k).filter(|&j| z[j] > 0.0).collect(),
    };
    Ok((SimplexWeights(z), report))
}

/// KKT violation of `z` for `min |sum z_j a_j|^2` on the simplex, where
/// `residual = sum z_j a_j`. At an optimum `<a_j, r>` equals `|r|^2` on the
/// support and is no smaller anywhere else.
fn kkt_residual(shifted: &[Vec<f64>], z: &[f64], residual: &[f64]) -> f64 {
    let level = dot(residual, residual);
    let mut worst = (z.iter().sum::<f64>() - 1.0).abs();
    for (a, &zj) in shifted.iter().zip(z) {
        let g = dot(a, residual);
        worst = worst.max((level - g).max(0.0));
        if zj > 0.0 {
            worst = worst.max((g - level).abs());
        }
        worst = worst.max((-zj).max(0.0));
    }
    worst
}

/// Coefficients (summing to one) of the minimum-norm point in the affine
/// hull of the corral, from the bordered system `[G 1; 1^T 0]`.
fn affine_minimizer(gram: &[Vec<f64>], corral: &[usize]) -> Option<Vec<f64>> {
    let m = corral.len();
    let mut a = vec![vec![0.0; m + 2]; m + 1];
    for (r, &i) in corral.iter().enumerate() {
        for (c, &j) in corral.iter().enumerate() {
            a[r][c] = gram[i][j];
        }
        a[r][m] = 1.0;
    }
    a[m][..m].iter_mut().for_each(|v| *v = 1.0);
    a[m][m + 1] = 1.0;
    let scale = corral.iter().map(|&i| gram[i][i]).fold(1.0f64, f64::max);
    let sol = solve_augmented(a, 1e-14 * scale)?;
    Some(sol[..m].to_vec())
}

/// Gaussian elimination with partial pivoting on an augmented `n × (n+1)`
/// system. `None` when a pivot falls below `tiny`.
#[allow(clippy::needless_range_loop)]
fn solve_augmented(mut a: Vec<Vec<f64>>, tiny: f64) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() <= tiny {
            return None;
        }
        a.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `W_k^T z`: the z-weighted combination of neighbor weight rows, projected
/// onto the nonnegative orthant (a no-op for nonnegative inputs).
pub fn reconstruct_weights(neighbor_weights: &[&[f64]], z: &SimplexWeights) -> Result<Vec<f64>> {
    if neighbor_weights.len() != z.len() {
        return Err(MknnError::DimensionMismatch {
            expected: z.len(),
            actual: neighbor_weights.len(),
        });
    }
    let m = neighbor_weights.first().map_or(0, |r| r.len());
    if let Some(row) = neighbor_weights.iter().find(|r| r.len() != m) {
        return Err(MknnError::DimensionMismatch {
            expected: m,
            actual: row.len(),
        });
    }
    let mut out = vec![0.0; m];
    for (row, &zi) in neighbor_weights.iter().zip(z.as_slice()) {
        if zi == 0.0 {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(row.iter()) {
            *o += zi * w;
        }
    }
    out.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(out)
}
