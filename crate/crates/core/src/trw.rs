//! Tired random walk similarity.
//!
//! With the transition matrix `P = D^-1 W`, the accumulated walk matrix is
//! `P_TRW = sum_t (alpha P)^t = (I - alpha P)^-1`. It is computed either by a
//! general LU solve against the identity ([`trw_direct`]) or through the
//! symmetric positive definite matrix `R = I - alpha D^-1/2 W D^-1/2` and a
//! Cholesky factorization, using `P_TRW = D^1/2 R^-1 D^-1/2` ([`trw_spd`]).

use std::io::{Read, Write};
use std::path::Path;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};

use crate::error::{MknnError, Result};
use crate::graph::{check_dense_budget, ConstrainedGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TrwRoute {
    /// LU factorization of `I - alpha P`.
    Direct,
    /// Cholesky factorization of `R`.
    #[default]
    SpdFast,
}

impl std::str::FromStr for TrwRoute {
    type Err = MknnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(TrwRoute::Direct),
            "spd-fast" | "spd" => Ok(TrwRoute::SpdFast),
            _ => Err(MknnError::param("route", format!("unknown route `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrwConfig {
    /// Strength reduction rate, in (0, 1).
    pub alpha: f64,
    pub route: TrwRoute,
    /// Bound on the max-abs entry of `(I - alpha P) P_TRW - I`.
    pub solve_tolerance: f64,
    /// Check the resolvent residual after fitting (one extra dense product).
    pub verify_residual: bool,
}

impl Default for TrwConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            route: TrwRoute::SpdFast,
            solve_tolerance: 1e-12,
            verify_residual: true,
        }
    }
}

impl TrwConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.solve_tolerance > 0.0) {
            return Err(MknnError::param("solve_tolerance", "must be positive"));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MknnError::param(
            "alpha",
            format!("{alpha} is not in (0, 1)"),
        ));
    }
    Ok(())
}

/// Fitted similarity state. Immutable once built.
#[derive(Clone, Debug)]
pub struct TrwModel {
    transition: Mat<f64>,
    degrees: Vec<f64>,
    ptrw: Mat<f64>,
    sym_weights: Mat<f64>,
    config: TrwConfig,
}

impl TrwModel {
    pub fn fit(graph: &ConstrainedGraph, config: &TrwConfig) -> Result<Self> {
        config.validate()?;
        check_dense_budget(graph.n(), 5)?;
        let (transition, degrees) = transition_matrix(graph)?;
        let ptrw = match config.route {
            TrwRoute::Direct => trw_direct(&transition, config.alpha)?,
            TrwRoute::SpdFast => trw_spd(graph.weights(), &degrees, config.alpha)?,
        };
        if config.verify_residual {
            let residual = resolvent_residual(&transition, config.alpha, &ptrw);
            if !(residual <= config.solve_tolerance) {
                return Err(MknnError::ResidualTooLarge {
                    residual,
                    tolerance: config.solve_tolerance,
                });
            }
        }
        let sym_weights = symmetric_weights(&ptrw);
        Ok(Self {
            transition,
            degrees,
            ptrw,
            sym_weights,
            config: *config,
        })
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Row-stochastic `P = D^-1 W`.
    pub fn transition(&self) -> &Mat<f64> {
        &self.transition
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn ptrw(&self) -> &Mat<f64> {
        &self.ptrw
    }

    /// `(P_TRW + P_TRW^T) / 2`.
    pub fn sym_weights(&self) -> &Mat<f64> {
        &self.sym_weights
    }

    pub fn config(&self) -> &TrwConfig {
        &self.config
    }
}

/// Row-normalizes the graph weights. Fails on a zero-degree vertex.
pub fn transition_matrix(graph: &ConstrainedGraph) -> Result<(Mat<f64>, Vec<f64>)> {
    transition_from_weights(graph.weights())
}

pub fn transition_from_weights(w: &Mat<f64>) -> Result<(Mat<f64>, Vec<f64>)> {
    let degrees = degrees(w)?;
    let p = Mat::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)] / degrees[i]);
    Ok((p, degrees))
}

fn degrees(w: &Mat<f64>) -> Result<Vec<f64>> {
    let n = w.nrows();
    let mut d = vec![0.0; n];
    for j in 0..w.ncols() {
        for (i, di) in d.iter_mut().enumerate() {
            *di += w[(i, j)];
        }
    }
    match d.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(i) if d[i].is_finite() => Err(MknnError::IsolatedVertex(i)),
        Some(_) => Err(MknnError::NonFinite("vertex degrees")),
        None => Ok(d),
    }
}

/// `(I - alpha P)^-1` by partial-pivoting LU, solved against the identity.
pub fn trw_direct(p: &Mat<f64>, alpha: f64) -> Result<Mat<f64>> {
    check_alpha(alpha)?;
    let n = p.nrows();
    let a = Mat::from_fn(n, n, |i, j| identity(i, j) - alpha * p[(i, j)]);
    let lu = a.partial_piv_lu();
    let mut x = Mat::<f64>::identity(n, n);
    lu.solve_in_place(x.as_mut());
    ensure_finite(&x)?;
    Ok(x)
}

/// `R = I - alpha D^-1/2 W D^-1/2`. Requires `W` exactly symmetric.
pub fn r_matrix(w: &Mat<f64>, degrees: &[f64], alpha: f64) -> Result<Mat<f64>> {
    check_alpha(alpha)?;
    let n = w.nrows();
    if degrees.len() != n {
        return Err(MknnError::DimensionMismatch {
            expected: n,
            actual: degrees.len(),
        });
    }
    if let Some(i) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(MknnError::IsolatedVertex(i));
    }
    for j in 0..n {
        for i in 0..j {
            if w[(i, j)] != w[(j, i)] {
                return Err(MknnError::NotSymmetric { row: i, col: j });
            }
        }
    }
    Ok(r_matrix_symmetric(w, degrees, alpha))
}

/// [`r_matrix`] for weights already known to be symmetric.
fn r_matrix_symmetric(w: &Mat<f64>, degrees: &[f64], alpha: f64) -> Mat<f64> {
    let n = w.nrows();
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    Mat::from_fn(n, n, |i, j| {
        identity(i, j) - alpha * (inv_sqrt[i] * w[(i, j)] * inv_sqrt[j])
    })
}

/// `D^-1/2 R^-1 D^1/2` with `R^-1` from a Cholesky factorization, using
/// `I - alpha D^-1 W = D^-1/2 R D^1/2`.
pub fn trw_spd(w: &Mat<f64>, degrees: &[f64], alpha: f64) -> Result<Mat<f64>> {
    let r = r_matrix(w, degrees, alpha)?;
    let llt = r
        .llt(Side::Lower)
        .map_err(|_| MknnError::NotPositiveDefinite)?;
    let r_inv = llt.inverse();
    let sqrt_d: Vec<f64> = degrees.iter().map(|d| d.sqrt()).collect();
    let n = w.nrows();
    let x = Mat::from_fn(n, n, |i, j| r_inv[(i, j)] * sqrt_d[j] / sqrt_d[i]);
    ensure_finite(&x)?;
    Ok(x)
}

/// Symmetric TRW weights restricted to the columns `cols`: the `n × cols.len()`
/// block of `(P_TRW + P_TRW^T) / 2`, from one Cholesky factorization of `R`
/// and `cols.len()` triangular solves.
pub fn sym_weight_columns(
    graph: &ConstrainedGraph,
    alpha: f64,
    cols: &[usize],
) -> Result<Mat<f64>> {
    let w = graph.weights();
    let n = w.nrows();
    check_alpha(alpha)?;
    let d = degrees(w)?;
    // ConstrainedGraph weights are symmetric by construction.
    let r = r_matrix_symmetric(w, &d, alpha);
    let llt = r
        .llt(Side::Lower)
        .map_err(|_| MknnError::NotPositiveDefinite)?;
    let mut x = Mat::<f64>::zeros(n, cols.len());
    for (c, &j) in cols.iter().enumerate() {
        if j >= n {
            return Err(MknnError::IndexOutOfRange { index: j, len: n });
        }
        x[(j, c)] = 1.0;
    }
    llt.solve_in_place(x.as_mut());
    let sqrt_d: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
    for (c, &j) in cols.iter().enumerate() {
        for i in 0..n {
            // (P_TRW)_ij = sqrt(d_j / d_i) Rinv_ij, and Rinv is symmetric
            x[(i, c)] *= 0.5 * (d[i] + d[j]) / (sqrt_d[i] * sqrt_d[j]);
        }
    }
    ensure_finite(&x)?;
    Ok(x)
}

/// `(P + P^T) / 2`, exactly symmetric.
pub fn symmetric_weights(ptrw: &Mat<f64>) -> Mat<f64> {
    let n = ptrw.nrows();
    let mut out = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = 0.5 * (ptrw[(i, j)] + ptrw[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Largest absolute entry of `(I - alpha P) X - I`.
pub fn resolvent_residual(p: &Mat<f64>, alpha: f64, x: &Mat<f64>) -> f64 {
    let n = p.nrows();
    let a = Mat::from_fn(n, n, |i, j| identity(i, j) - alpha * p[(i, j)]);
    let prod = &a * x;
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let r = (prod[(i, j)] - identity(i, j)).abs();
            if r.is_nan() {
                return f64::INFINITY;
            }
            worst = worst.max(r);
        }
    }
    worst
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Mat<f64>) -> Result<f64> {
    let ev = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| MknnError::Singular)?;
    Ok(ev.into_iter().fold(f64::INFINITY, f64::min))
}

#[inline]
fn identity(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

fn ensure_finite(m: &Mat<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(MknnError::Singular);
            }
        }
    }
    Ok(())
}

const MAGIC: &[u8; 8] = b"MKNNTRW\0";
const FORMAT_VERSION: u8 = 1;

impl TrwModel {
    /// Binary dump: magic, version byte, route byte, verify byte, then
    /// little-endian `alpha`, `solve_tolerance` (f64), `n` (u64), degrees, and
    /// the transition, P_TRW and symmetric weight matrices row-major.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        let route = match self.config.route {
            TrwRoute::Direct => 0u8,
            TrwRoute::SpdFast => 1u8,
        };
        out.write_all(&[FORMAT_VERSION, route, self.config.verify_residual as u8])?;
        out.write_all(&self.config.alpha.to_le_bytes())?;
        out.write_all(&self.config.solve_tolerance.to_le_bytes())?;
        out.write_all(&(self.n() as u64).to_le_bytes())?;
        for d in &self.degrees {
            out.write_all(&d.to_le_bytes())?;
        }
        for m in [&self.transition, &self.ptrw, &self.sym_weights] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.write_all(&m[(i, j)].to_le_bytes())?;
                }
            }
        }
        out.flush()
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let bad = |e: std::io::Error| MknnError::Format(e.to_string());
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(MknnError::Format("bad magic header".into()));
        }
        let mut head = [0u8; 3];
        input.read_exact(&mut head).map_err(bad)?;
        if head[0] != FORMAT_VERSION {
            return Err(MknnError::Format(format!(
                "unsupported version {}",
                head[0]
            )));
        }
        let route = match head[1] {
            0 => TrwRoute::Direct,
            1 => TrwRoute::SpdFast,
            r => return Err(MknnError::Format(format!("unknown route byte {r}"))),
        };
        let mut buf = [0u8; 8];
        let mut next_f64 = |input: &mut R| -> Result<f64> {
            input.read_exact(&mut buf).map_err(bad)?;
            Ok(f64::from_le_bytes(buf))
        };
        let alpha = next_f64(&mut input)?;
        let solve_tolerance = next_f64(&mut input)?;
        let mut nb = [0u8; 8];
        input.read_exact(&mut nb).map_err(bad)?;
        let n = usize::try_from(u64::from_le_bytes(nb))
            .map_err(|_| MknnError::Format("n overflows usize".into()))?;
        check_dense_budget(n, 3)?;
        let config = TrwConfig {
            alpha,
            route,
            solve_tolerance,
            verify_residual: head[2] != 0,
        };
        config.validate()?;
        let degrees = (0..n)
            .map(|_| next_f64(&mut input))
            .collect::<Result<Vec<_>>>()?;
        let mut read_mat = |input: &mut R| -> Result<Mat<f64>> {
            let mut m = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = next_f64(input)?;
                }
            }
            Ok(m)
        };
        let transition = read_mat(&mut input)?;
        let ptrw = read_mat(&mut input)?;
        let sym_weights = read_mat(&mut input)?;
        Ok(Self {
            transition,
            degrees,
            ptrw,
            sym_weights,
            config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| MknnError::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| MknnError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| MknnError::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphConfig;

    fn mat(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    fn graph(rows: &[&[f64]]) -> ConstrainedGraph {
        ConstrainedGraph::from_weights(mat(rows), GraphConfig::new(1.0)).unwrap()
    }

    fn assert_close(a: &Mat<f64>, b: &Mat<f64>, tol: f64) {
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                assert!(
                    (a[(i, j)] - b[(i, j)]).abs() <= tol,
                    "({i},{j}): {} vs {}",
                    a[(i, j)],
                    b[(i, j)]
                );
            }
        }
    }

    #[test]
    fn two_node_transition() {
        let (p, d) = transition_matrix(&graph(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(d, vec![1.0, 1.0]);
        assert_close(&p, &mat(&[&[0.0, 1.0], &[1.0, 0.0]]), 0.0);
    }

    #[test]
    fn complete_graph_transition() {
        let g = graph(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]]);
        let (p, _) = transition_matrix(&g).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(p[(i, j)], if i == j { 0.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn isolated_vertex_is_named() {
        let g = graph(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        assert!(matches!(
            transition_matrix(&g),
            Err(MknnError::IsolatedVertex(2))
        ));
    }

    #[test]
    fn two_node_closed_form() {
        let p = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let expect = mat(&[&[4.0 / 3.0, 2.0 / 3.0], &[2.0 / 3.0, 4.0 / 3.0]]);
        assert_close(&trw_direct(&p, 0.5).unwrap(), &expect, 1e-15);
        let spd = trw_spd(&p, &[1.0, 1.0], 0.5).unwrap();
        assert_close(&spd, &expect, 1e-15);
    }

    #[test]
    fn tiny_alpha_gives_identity() {
        let p = mat(&[&[0.0, 0.3, 0.7], &[0.5, 0.0, 0.5], &[0.9, 0.1, 0.0]]);
        assert_close(
            &trw_direct(&p, 1e-300).unwrap(),
            &Mat::identity(3, 3),
            1e-12,
        );
    }

    #[test]
    fn symmetric_weight_arithmetic() {
        let w = symmetric_weights(&mat(&[&[1.0, 0.2], &[0.6, 1.0]]));
        assert!((w[(0, 1)] - 0.4).abs() < 1e-15);
        assert_eq!(w[(0, 1)], w[(1, 0)]);
        let s = mat(&[&[2.0, 0.5], &[0.5, 3.0]]);
        assert_close(&symmetric_weights(&s), &s, 0.0);
    }

    #[test]
    fn rejects_bad_alpha_and_asymmetry() {
        let p = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(trw_direct(&p, 1.0).is_err());
        assert!(trw_direct(&p, 0.0).is_err());
        let w = mat(&[&[0.0, 1.0], &[0.9, 0.0]]);
        assert!(matches!(
            trw_spd(&w, &[1.0, 0.9], 0.5),
            Err(MknnError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn fit_both_routes_and_columns_agree() {
        let g = graph(&[
            &[0.0, 0.9, 0.1, 0.0],
            &[0.9, 0.0, 0.5, 0.2],
            &[0.1, 0.5, 0.0, 0.7],
            &[0.0, 0.2, 0.7, 0.0],
        ]);
        let mut cfg = TrwConfig::with_alpha(0.8);
        cfg.route = TrwRoute::Direct;
        let direct = TrwModel::fit(&g, &cfg).unwrap();
        cfg.route = TrwRoute::SpdFast;
        let spd = TrwModel::fit(&g, &cfg).unwrap();
        assert_close(direct.ptrw(), spd.ptrw(), 1e-13);
        let cols = sym_weight_columns(&g, 0.8, &[3, 1]).unwrap();
        for i in 0..4 {
            assert!((cols[(i, 0)] - spd.sym_weights()[(i, 3)]).abs() < 1e-13);
            assert!((cols[(i, 1)] - spd.sym_weights()[(i, 1)]).abs() < 1e-13);
        }
        for i in 0..4 {
            assert!(spd.ptrw()[(i, i)] >= 1.0);
            let row_sum: f64 = (0..4).map(|j| spd.transition()[(i, j)]).sum();
            assert!((row_sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_dump_round_trip() {
        let g = graph(&[&[0.0, 0.4, 0.3], &[0.4, 0.0, 0.8], &[0.3, 0.8, 0.0]]);
        let model = TrwModel::fit(&g, &TrwConfig::with_alpha(0.6)).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(buf.len(), 8 + 3 + 8 + 8 + 8 + 3 * 8 + 3 * 9 * 8);
        let back = TrwModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.config(), model.config());
        assert_eq!(back.degrees(), model.degrees());
        assert_close(back.sym_weights(), model.sym_weights(), 0.0);
        assert_close(back.ptrw(), model.ptrw(), 0.0);

        buf[0] = b'X';
        assert!(matches!(
            TrwModel::read_from(buf.as_slice()),
            Err(MknnError::Format(_))
        ));
        assert!(TrwModel::read_from(&[][..]).is_err());
    }
}
