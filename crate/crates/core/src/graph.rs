//! Constrained weighted graph: a Gaussian kernel over all pairs, must-link
//! and cannot-link overrides between labeled samples, then a decaying boost
//! along R-level nearest-neighbor trees rooted at every labeled sample.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use faer::Mat;

use crate::data::Dataset;
use crate::error::{MknnError, Result};
use crate::neighbors::{nearest_among, squared_distance};

/// Tree branching used when neither the config nor a classifier supplies one.
pub const DEFAULT_TREE_BRANCH: usize = 3;

/// Kernel weights below this are stored as zero. Keeping every pairwise
/// product of weights in the normal range avoids subnormal arithmetic, which
/// slows the dense factorizations by an order of magnitude.
pub const KERNEL_FLOOR: f64 = 1e-150;

/// Dense `f64` matrices above this size are refused.
pub const MAX_DENSE_BYTES: u64 = 4 << 30;

#[derive(Clone, Debug, PartialEq)]
pub struct GraphConfig {
    /// Gaussian kernel width.
    pub sigma: f64,
    /// Depth R of the strengthened trees; 0 disables strengthening.
    pub tree_depth: usize,
    /// Applied strengthening is `theta_fraction * theta_bar(w)`.
    pub theta_fraction: f64,
    /// Neighbors per tree node. `None` means "use the classifier's k".
    pub tree_branch: Option<usize>,
    pub self_loops: bool,
    /// Zero out final weights below this value.
    pub sparsify_below: Option<f64>,
}

impl GraphConfig {
    pub fn new(sigma: f64) -> Self {
        Self {
            sigma,
            tree_depth: 2,
            theta_fraction: 0.1,
            tree_branch: None,
            self_loops: false,
            sparsify_below: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(MknnError::param(
                "sigma",
                format!("{} is not positive", self.sigma),
            ));
        }
        if !(self.theta_fraction > 0.0 && self.theta_fraction < 1.0) {
            return Err(MknnError::param(
                "theta_fraction",
                format!("{} is not in (0, 1)", self.theta_fraction),
            ));
        }
        if self.tree_branch == Some(0) {
            return Err(MknnError::param("tree_branch", "must be positive"));
        }
        if let Some(eps) = self.sparsify_below {
            if !(0.0..1.0).contains(&eps) {
                return Err(MknnError::param("sparsify_below", "must be in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Edge `parent -> child` entering tree level `level` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeEdge {
    pub parent: usize,
    pub child: usize,
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrengthenedTree {
    pub root: usize,
    /// `levels[0] == [root]`; no node appears in more than one level.
    pub levels: Vec<Vec<usize>>,
    pub edges: Vec<TreeEdge>,
}

#[derive(Clone, Debug)]
pub struct ConstrainedGraph {
    weights: Mat<f64>,
    config: GraphConfig,
}

impl ConstrainedGraph {
    /// Wraps an arbitrary symmetric nonnegative weight matrix.
    pub fn from_weights(weights: Mat<f64>, config: GraphConfig) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(MknnError::DimensionMismatch {
                expected: n,
                actual: weights.ncols(),
            });
        }
        for j in 0..n {
            for i in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() {
                    return Err(MknnError::NonFinite("graph weights"));
                }
                if w < 0.0 {
                    return Err(MknnError::param("weights", "negative entry"));
                }
                if w != weights[(j, i)] {
                    return Err(MknnError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { weights, config })
    }

    pub fn weights(&self) -> &Mat<f64> {
        &self.weights
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_matrix_csv(&self.weights, out)
    }
}

/// Dense matrix as comma-separated rows.
pub fn write_matrix_csv<W: Write>(m: &Mat<f64>, mut out: W) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{:?}", m[(i, j)])?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub(crate) fn check_dense_budget(n: usize, matrices: u64) -> Result<()> {
    let bytes = (n as u64)
        .saturating_mul(n as u64)
        .saturating_mul(8 * matrices);
    if bytes > MAX_DENSE_BYTES {
        return Err(MknnError::TooLarge {
            n,
            bytes,
            limit: MAX_DENSE_BYTES,
        });
    }
    Ok(())
}

/// `exp(-|x_i - x_j|^2 / 2 sigma^2)` for all pairs, with values below
/// [`KERNEL_FLOOR`] set to zero. The diagonal is 1 with self-loops and 0
/// otherwise.
pub fn gaussian_weights(ds: &Dataset, sigma: f64, self_loops: bool) -> Result<Mat<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MknnError::param(
            "sigma",
            format!("{sigma} is not positive"),
        ));
    }
    let n = ds.n();
    check_dense_budget(n, 1)?;
    let scale = 1.0 / (2.0 * sigma * sigma);
    let mut w = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let xj = ds.row(j);
        w[(j, j)] = if self_loops { 1.0 } else { 0.0 };
        for i in 0..j {
            let d2 = squared_distance(ds.row(i), xj);
            if !d2.is_finite() {
                return Err(MknnError::NonFinite("pairwise distances"));
            }
            let mut v = (-d2 * scale).exp();
            if v < KERNEL_FLOOR {
                v = 0.0;
            }
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}

/// `min((1 - w) / w, 1)`, the largest strengthening that keeps `w (1 + theta)`
/// below the must-link weight.
pub fn theta_bar(w: f64) -> Result<f64> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(MknnError::param(
            "w",
            format!("theta_bar needs 0 < w <= 1, got {w}"),
        ));
    }
    Ok(((1.0 - w) / w).min(1.0))
}

/// Multiplier `1 + theta^level` with `theta = theta_fraction * theta_bar(w)`.
/// Edges that cannot be strengthened (`w <= 0` or `w >= 1`) get 1.
pub fn strengthening_factor(w: f64, theta_fraction: f64, level: usize) -> f64 {
    if !(w > 0.0 && w < 1.0) {
        return 1.0;
    }
    let theta = theta_fraction * theta_bar(w).expect("w in (0, 1)");
    1.0 + theta.powi(level as i32)
}

struct NeighborCache<'a> {
    ds: &'a Dataset,
    branch: usize,
    cache: HashMap<usize, Vec<usize>>,
}

impl<'a> NeighborCache<'a> {
    fn new(ds: &'a Dataset, branch: usize) -> Self {
        Self {
            ds,
            branch,
            cache: HashMap::new(),
        }
    }

    fn neighbors(&mut self, v: usize) -> &[usize] {
        let (ds, branch) = (self.ds, self.branch);
        self.cache.entry(v).or_insert_with(|| {
            nearest_among(
                ds.samples(),
                ds.dim(),
                ds.row(v),
                (0..ds.n()).filter(|&j| j != v),
                branch,
            )
            .into_iter()
            .map(|(_, j)| j)
            .collect()
        })
    }
}

/// Breadth-first nearest-neighbor tree from `root`. A candidate child that
/// already sits in an earlier level (or was claimed earlier in the same
/// level) is dropped.
pub fn build_tree(
    ds: &Dataset,
    root: usize,
    depth: usize,
    branch: usize,
) -> Result<StrengthenedTree> {
    if root >= ds.n() {
        return Err(MknnError::IndexOutOfRange {
            index: root,
            len: ds.n(),
        });
    }
    if ds.label(root).is_none() {
        return Err(MknnError::param(
            "root",
            format!("sample {root} is unlabeled"),
        ));
    }
    if depth == 0 {
        return Err(MknnError::param("depth", "must be at least 1"));
    }
    if branch == 0 {
        return Err(MknnError::param("branch", "must be positive"));
    }
    let mut cache = NeighborCache::new(ds, branch);
    Ok(grow_tree(&mut cache, root, depth))
}

fn grow_tree(cache: &mut NeighborCache<'_>, root: usize, depth: usize) -> StrengthenedTree {
    let mut seen = HashSet::from([root]);
    let mut levels = vec![vec![root]];
    let mut edges = Vec::new();
    for level in 1..=depth {
        let mut next = Vec::new();
        for &parent in &levels[level - 1] {
            for &child in cache.neighbors(parent) {
                if seen.insert(child) {
                    next.push(child);
                    edges.push(TreeEdge {
                        parent,
                        child,
                        level,
                    });
                }
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }
    StrengthenedTree {
        root,
        levels,
        edges,
    }
}

/// Kernel weights with the constraint overrides applied, before tree
/// strengthening.
pub fn constraint_weights(ds: &Dataset, cfg: &GraphConfig) -> Result<Mat<f64>> {
    cfg.validate()?;
    let mut w = gaussian_weights(ds, cfg.sigma, cfg.self_loops)?;
    let labeled = ds.labeled_indices();
    for &i in &labeled {
        for &j in &labeled {
            if i != j {
                w[(i, j)] = if ds.label(i) == ds.label(j) { 1.0 } else { 0.0 };
            }
        }
    }
    Ok(w)
}

/// Largest strengthening factor any tree assigns to each directed edge
/// `(parent, child)`, computed from the unboosted weights `w`.
fn strengthening_factors(
    ds: &Dataset,
    cfg: &GraphConfig,
    w: &Mat<f64>,
) -> HashMap<(usize, usize), f64> {
    let mut factors: HashMap<(usize, usize), f64> = HashMap::new();
    if cfg.tree_depth == 0 {
        return factors;
    }
    let branch = cfg.tree_branch.unwrap_or(DEFAULT_TREE_BRANCH);
    let mut cache = NeighborCache::new(ds, branch);
    for root in ds.labeled_indices() {
        let tree = grow_tree(&mut cache, root, cfg.tree_depth);
        for e in tree.edges {
            let f = strengthening_factor(w[(e.parent, e.child)], cfg.theta_fraction, e.level);
            if f > 1.0 {
                let slot = factors.entry((e.parent, e.child)).or_insert(1.0);
                *slot = slot.max(f);
            }
        }
    }
    factors
}

/// Constraint weights with the tree boost applied in the `parent -> child`
/// direction only. Each boosted entry uses the largest factor any tree
/// assigns to it, computed from the unboosted weight.
pub fn directed_strengthened_weights(ds: &Dataset, cfg: &GraphConfig) -> Result<Mat<f64>> {
    let mut w = constraint_weights(ds, cfg)?;
    for ((p, c), f) in strengthening_factors(ds, cfg, &w) {
        w[(p, c)] *= f;
    }
    Ok(w)
}

/// Builds the constrained graph: kernel, must-link/cannot-link overrides,
/// tree strengthening, then symmetrization by averaging with the transpose.
pub fn build_constrained_graph(ds: &Dataset, cfg: &GraphConfig) -> Result<ConstrainedGraph> {
    let mut w = constraint_weights(ds, cfg)?;
    // The unboosted matrix is symmetric, so only boosted pairs change when
    // averaging with the transpose.
    let factors = strengthening_factors(ds, cfg, &w);
    let mut pairs: Vec<(usize, usize)> =
        factors.keys().map(|&(p, c)| (p.min(c), p.max(c))).collect();
    pairs.sort_unstable();
    pairs.dedup();
    for (i, j) in pairs {
        let base = w[(i, j)];
        let fij = factors.get(&(i, j)).copied().unwrap_or(1.0);
        let fji = factors.get(&(j, i)).copied().unwrap_or(1.0);
        let v = (0.5 * (base * fij + base * fji)).clamp(0.0, 1.0);
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    if let Some(eps) = cfg.sparsify_below {
        for j in 0..w.ncols() {
            for i in 0..w.nrows() {
                if w[(i, j)] < eps {
                    w[(i, j)] = 0.0;
                }
            }
        }
    }
    Ok(ConstrainedGraph {
        weights: w,
        config: cfg.clone(),
    })
}
