use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{predict, Algorithm, MethodConfig};
use crate::data::{Dataset, Label};
use crate::error::{MknnError, Result};
use crate::neighbors::nearest_among;

#[derive(Clone, Debug, PartialEq)]
pub struct TuneGrid {
    pub sigma_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub geo_neighbors_values: Vec<usize>,
    pub folds: usize,
}

/// Multiples of the mean nearest-neighbor distance used by
/// [`TuneGrid::for_dataset`].
pub const SIGMA_MULTIPLES: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
pub const DEFAULT_ALPHAS: [f64; 3] = [0.5, 0.9, 0.99];
pub const DEFAULT_GEO_NEIGHBORS: [usize; 4] = [5, 8, 12, 16];

impl TuneGrid {
    pub fn new(
        sigma_values: Vec<f64>,
        alpha_values: Vec<f64>,
        geo_neighbors_values: Vec<usize>,
    ) -> Self {
        Self {
            sigma_values,
            alpha_values,
            geo_neighbors_values,
            folds: 2,
        }
    }

    /// A grid whose kernel widths scale with the data: the mean
    /// nearest-neighbor distance times [`SIGMA_MULTIPLES`].
    pub fn for_dataset(ds: &Dataset) -> Self {
        let s = mean_nn_distance(ds);
        Self::new(
            SIGMA_MULTIPLES.iter().map(|m| m * s).collect(),
            DEFAULT_ALPHAS.to_vec(),
            DEFAULT_GEO_NEIGHBORS.to_vec(),
        )
    }

    /// Candidate configurations for `algorithm` in declaration order
    /// (sigma-major for mkNN).
    pub fn points(&self, algorithm: Algorithm, base: &MethodConfig) -> Result<Vec<MethodConfig>> {
        if self.folds < 2 {
            return Err(MknnError::param("folds", "need at least 2"));
        }
        let out: Vec<MethodConfig> = match algorithm {
            Algorithm::Knn | Algorithm::Wknn => vec![base.clone()],
            Algorithm::Gknn => self
                .geo_neighbors_values
                .iter()
                .map(|&g| MethodConfig {
                    geo_neighbors: g,
                    ..base.clone()
                })
                .collect(),
            Algorithm::Mknn => self
                .sigma_values
                .iter()
                .flat_map(|&s| {
                    self.alpha_values.iter().map(move |&a| {
                        let mut c = base.clone();
                        c.graph.sigma = s;
                        c.trw.alpha = a;
                        c
                    })
                })
                .collect(),
        };
        if out.is_empty() {
            return Err(MknnError::EmptyGrid);
        }
        Ok(out)
    }
}

/// Mean Euclidean distance from each sample to its nearest other sample.
pub fn mean_nn_distance(ds: &Dataset) -> f64 {
    let n = ds.n();
    if n < 2 {
        return 1.0;
    }
    let total: f64 = (0..n)
        .map(|i| {
            nearest_among(
                ds.samples(),
                ds.dim(),
                ds.row(i),
                (0..n).filter(|&j| j != i),
                1,
            )[0]
            .0
            .sqrt()
        })
        .sum();
    let mean = total / n as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub sigma: f64,
    pub alpha: f64,
    pub geo_neighbors: usize,
    pub cv_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneOutcome {
    pub best: MethodConfig,
    pub best_error: f64,
    pub evaluations: Vec<GridPoint>,
}

/// Stratified fold assignment of the labeled samples: each class is
/// shuffled and dealt round-robin into `folds` folds.
pub fn stratified_folds(ds: &Dataset, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    for class in 1..=ds.n_classes() as Label {
        let mut members: Vec<usize> = ds
            .labeled_indices()
            .into_iter()
            .filter(|&i| ds.label(i) == Some(class))
            .collect();
        if members.len() < folds {
            return Err(MknnError::InsufficientClassSamples {
                class,
                available: members.len(),
                requested: folds,
            });
        }
        members.shuffle(&mut rng);
        for (pos, i) in members.into_iter().enumerate() {
            out[pos % folds].push(i);
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Cross-validated error over the labeled samples. Each fold's labels are
/// hidden in turn; all samples still take part in the fit. `k` is capped at
/// the training fold size.
pub fn cv_error(
    ds: &Dataset,
    algorithm: Algorithm,
    k: usize,
    cfg: &MethodConfig,
    folds: &[Vec<usize>],
) -> Result<f64> {
    let mut wrong = 0usize;
    let mut total = 0usize;
    for held in folds {
        let mut labels = ds.labels().to_vec();
        for &i in held {
            labels[i] = None;
        }
        let train = ds.with_working_labels(labels)?;
        let k_eff = k.min(train.n_labeled());
        let pred = predict(&train, algorithm, k_eff, cfg, Some(held))?;
        wrong += held
            .iter()
            .zip(&pred.labels)
            .filter(|(&i, &p)| ds.label(i) != Some(p))
            .count();
        total += held.len();
    }
    Ok(wrong as f64 / total as f64)
}

/// Grid search by stratified cross-validation. Grid points that fail
/// numerically score as infinitely bad; ties go to the first declared
/// point.
pub fn tune(
    ds: &Dataset,
    algorithm: Algorithm,
    k: usize,
    grid: &TuneGrid,
    base: &MethodConfig,
    seed: u64,
) -> Result<TuneOutcome> {
    let points = grid.points(algorithm, base)?;
    let folds = stratified_folds(ds, grid.folds, seed)?;
    let errors: Vec<f64> = points
        .par_iter()
        .map(|cfg| match cv_error(ds, algorithm, k, cfg, &folds) {
            Err(e) if e.is_numerical() => Ok(f64::INFINITY),
            other => other,
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, e) in errors.iter().enumerate() {
        if *e < errors[best] {
            best = i;
        }
    }
    let evaluations = points
        .iter()
        .zip(&errors)
        .map(|(c, &e)| GridPoint {
            sigma: c.graph.sigma,
            alpha: c.trw.alpha,
            geo_neighbors: c.geo_neighbors,
            cv_error: e,
        })
        .collect();
    Ok(TuneOutcome {
        best: points[best].clone(),
        best_error: errors[best],
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, split, SplitSpec, SyntheticKind};

    fn fixture() -> Dataset {
        let ds = make_synthetic(SyntheticKind::TwoArcs, 40, 0.03, 2).unwrap();
        split(&ds, &SplitSpec::new(4, 1)).unwrap()
    }

    #[test]
    fn folds_are_stratified_and_deterministic() {
        let ds = fixture();
        let f = stratified_folds(&ds, 2, 9).unwrap();
        assert_eq!(f, stratified_folds(&ds, 2, 9).unwrap());
        for fold in &f {
            let ones = fold.iter().filter(|&&i| ds.label(i) == Some(1)).count();
            assert_eq!((ones, fold.len()), (2, 4));
        }
        assert!(stratified_folds(&ds, 5, 9).is_err());
    }

    #[test]
    fn single_point_grid() {
        let ds = fixture();
        let grid = TuneGrid::new(vec![0.3], vec![0.9], vec![4]);
        let base = MethodConfig::new(1.0, 0.5, 3);
        let out = tune(&ds, Algorithm::Mknn, 2, &grid, &base, 0).unwrap();
        assert_eq!(out.best.graph.sigma, 0.3);
        assert_eq!(out.best.trw.alpha, 0.9);
        let out = tune(&ds, Algorithm::Gknn, 2, &grid, &base, 0).unwrap();
        assert_eq!(out.best.geo_neighbors, 4);
    }

    #[test]
    fn empty_grid() {
        let ds = fixture();
        let grid = TuneGrid::new(vec![], vec![0.9], vec![]);
        let base = MethodConfig::new(1.0, 0.5, 3);
        assert!(matches!(
            tune(&ds, Algorithm::Mknn, 1, &grid, &base, 0),
            Err(MknnError::EmptyGrid)
        ));
        assert!(matches!(
            tune(&ds, Algorithm::Gknn, 1, &grid, &base, 0),
            Err(MknnError::EmptyGrid)
        ));
        assert!(tune(&ds, Algorithm::Knn, 1, &grid, &base, 0).is_ok());
    }

    #[test]
    fn selection_is_the_minimum() {
        let ds = fixture();
        let grid = TuneGrid::new(vec![0.02, 0.1, 0.3, 1.0], vec![0.5, 0.99], vec![]);
        let out = tune(
            &ds,
            Algorithm::Mknn,
            2,
            &grid,
            &MethodConfig::new(1.0, 0.5, 3),
            3,
        )
        .unwrap();
        assert_eq!(out.evaluations.len(), 8);
        assert!(out.evaluations.iter().all(|g| out.best_error <= g.cv_error));
        let first = out
            .evaluations
            .iter()
            .position(|g| g.cv_error == out.best_error)
            .unwrap();
        assert_eq!(out.evaluations[first].sigma, out.best.graph.sigma);
        assert_eq!(out.evaluations[first].alpha, out.best.trw.alpha);
    }
}
