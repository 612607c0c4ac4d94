//! mkNN and the Euclidean/geodesic kNN baselines.

mod baselines;
mod tune;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub use baselines::{
    geodesic_distances, gknn_baseline, knn_baseline, wknn_baseline, INVERSE_DISTANCE_EPS,
};
pub use tune::{
    cv_error, mean_nn_distance, stratified_folds, tune, GridPoint, TuneGrid, TuneOutcome,
    DEFAULT_ALPHAS, DEFAULT_GEO_NEIGHBORS, SIGMA_MULTIPLES,
};

use crate::data::{Dataset, Label};
use crate::error::{MknnError, Result};
use crate::graph::{build_constrained_graph, GraphConfig};
use crate::metrics::error_rate;
use crate::neighbors::smallest_k;
use crate::trw::{sym_weight_columns, TrwConfig, TrwModel, TrwRoute};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Knn,
    Wknn,
    Gknn,
    Mknn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Knn,
        Algorithm::Wknn,
        Algorithm::Gknn,
        Algorithm::Mknn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::Wknn => "wknn",
            Algorithm::Gknn => "gknn",
            Algorithm::Mknn => "mknn",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = MknnError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| MknnError::UnknownKind(s.to_string()))
    }
}

/// Everything except `k` that any of the algorithms needs.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodConfig {
    pub graph: GraphConfig,
    pub trw: TrwConfig,
    /// Neighbors per node of the geodesic graph (gkNN).
    pub geo_neighbors: usize,
}

impl MethodConfig {
    pub fn new(sigma: f64, alpha: f64, geo_neighbors: usize) -> Self {
        Self {
            graph: GraphConfig::new(sigma),
            trw: TrwConfig::with_alpha(alpha),
            geo_neighbors,
        }
    }
}

/// Predicted labels for a set of query indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub indices: Vec<usize>,
    pub labels: Vec<Label>,
}

impl Predictions {
    /// Error against the dataset's ground truth, over queries that have one.
    pub fn error_rate(&self, ds: &Dataset) -> Result<f64> {
        let (pred, truth): (Vec<Label>, Vec<Label>) = self
            .indices
            .iter()
            .zip(&self.labels)
            .filter_map(|(&i, &p)| ds.truth().get(i).copied().flatten().map(|t| (p, t)))
            .unzip();
        error_rate(&pred, &truth)
    }

    /// Full-length label vector: working labels where present, predictions
    /// elsewhere.
    pub fn fill(&self, ds: &Dataset) -> Vec<Option<Label>> {
        let mut out = ds.labels().to_vec();
        for (&i, &p) in self.indices.iter().zip(&self.labels) {
            out[i] = Some(p);
        }
        out
    }
}

/// Result of a weighted vote among labeled candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct Vote {
    pub class: Label,
    /// Per-class summed weight, index `c - 1` for class `c`.
    pub scores: Vec<f64>,
    /// Winning candidates as positions into the candidate list.
    pub neighbors: Vec<usize>,
}

/// Picks the `k` largest `weights` (ties to the lower position), sums them
/// per class and returns the best class (ties to the smaller class).
pub fn weighted_vote(weights: &[f64], labels: &[Label], k: usize, n_classes: usize) -> Vote {
    let keyed = weights.iter().enumerate().map(|(i, &w)| (-w, i)).collect();
    let chosen = smallest_k(keyed, k);
    let mut scores = vec![0.0; n_classes];
    for &(_, pos) in &chosen {
        scores[labels[pos] as usize - 1] += weights[pos];
    }
    Vote {
        class: argmax_class(&scores),
        scores,
        neighbors: chosen.into_iter().map(|p| p.1).collect(),
    }
}

/// Smallest class whose score is maximal.
pub(crate) fn argmax_class(scores: &[f64]) -> Label {
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    best as Label + 1
}

pub(crate) fn check_k(k: usize, labeled: usize) -> Result<()> {
    if k == 0 {
        return Err(MknnError::param("k", "must be positive"));
    }
    if k > labeled {
        return Err(MknnError::KExceedsLabeled { k, labeled });
    }
    Ok(())
}

fn graph_config_for(cfg: &GraphConfig, k: usize) -> GraphConfig {
    let mut g = cfg.clone();
    g.tree_branch.get_or_insert(k);
    g
}

/// A fitted transductive mkNN model over all samples of a dataset.
#[derive(Clone, Debug)]
pub struct MknnModel {
    trw: TrwModel,
    dataset: Dataset,
    k: usize,
    labeled: Vec<usize>,
    labeled_classes: Vec<Label>,
}

/// Builds the constrained graph over every sample and fits the TRW weights.
/// An unset tree branch defaults to `k`.
pub fn fit_mknn(ds: &Dataset, gcfg: &GraphConfig, tcfg: &TrwConfig, k: usize) -> Result<MknnModel> {
    let labeled = ds.labeled_indices();
    check_k(k, labeled.len())?;
    let graph = build_constrained_graph(ds, &graph_config_for(gcfg, k))?;
    let trw = TrwModel::fit(&graph, tcfg)?;
    MknnModel::from_parts(trw, ds.clone(), k)
}

impl MknnModel {
    /// Pairs an already fitted TRW model with its dataset.
    pub fn from_parts(trw: TrwModel, dataset: Dataset, k: usize) -> Result<Self> {
        if trw.n() != dataset.n() {
            return Err(MknnError::DimensionMismatch {
                expected: dataset.n(),
                actual: trw.n(),
            });
        }
        let labeled = dataset.labeled_indices();
        check_k(k, labeled.len())?;
        let labeled_classes = labeled
            .iter()
            .map(|&i| dataset.label(i).expect("labeled"))
            .collect();
        Ok(Self {
            trw,
            dataset,
            k,
            labeled,
            labeled_classes,
        })
    }

    pub fn trw(&self) -> &TrwModel {
        &self.trw
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    /// Classes of [`Self::labeled`], in the same order.
    pub fn labeled_classes(&self) -> &[Label] {
        &self.labeled_classes
    }

    /// Symmetric TRW weights from sample `i` to every labeled sample.
    pub fn weights_to_labeled(&self, i: usize) -> Vec<f64> {
        let w = self.trw.sym_weights();
        self.labeled.iter().map(|&j| w[(i, j)]).collect()
    }

    pub fn vote(&self, weights_to_labeled: &[f64]) -> Vote {
        let mut v = weighted_vote(
            weights_to_labeled,
            &self.labeled_classes,
            self.k,
            self.dataset.n_classes(),
        );
        v.neighbors = v.neighbors.into_iter().map(|p| self.labeled[p]).collect();
        v
    }

    /// Votes among the `k` labeled samples with the largest TRW weight to
    /// the unlabeled sample `idx`.
    pub fn classify_point(&self, idx: usize) -> Result<Vote> {
        if idx >= self.dataset.n() {
            return Err(MknnError::IndexOutOfRange {
                index: idx,
                len: self.dataset.n(),
            });
        }
        if self.dataset.label(idx).is_some() {
            return Err(MknnError::AlreadyLabeled(idx));
        }
        Ok(self.vote(&self.weights_to_labeled(idx)))
    }

    pub fn classify_all(&self) -> Predictions {
        let indices = self.dataset.unlabeled_indices();
        let labels = indices
            .iter()
            .map(|&i| self.vote(&self.weights_to_labeled(i)).class)
            .collect();
        Predictions { indices, labels }
    }
}

/// Transductive mkNN predictions for `queries` without materializing the
/// full TRW matrix: with the SPD route only the labeled columns of the
/// symmetric weights are solved for.
pub fn mknn_predict(
    ds: &Dataset,
    cfg: &MethodConfig,
    k: usize,
    queries: &[usize],
) -> Result<Predictions> {
    let labeled = ds.labeled_indices();
    check_k(k, labeled.len())?;
    let classes: Vec<Label> = labeled
        .iter()
        .map(|&i| ds.label(i).expect("labeled"))
        .collect();
    let graph = build_constrained_graph(ds, &graph_config_for(&cfg.graph, k))?;
    let weights = match cfg.trw.route {
        TrwRoute::SpdFast => {
            cfg.trw.validate()?;
            sym_weight_columns(&graph, cfg.trw.alpha, &labeled)?
        }
        TrwRoute::Direct => {
            let model = TrwModel::fit(&graph, &cfg.trw)?;
            let w = model.sym_weights();
            faer::Mat::from_fn(ds.n(), labeled.len(), |i, c| w[(i, labeled[c])])
        }
    };
    let mut row = vec![0.0; labeled.len()];
    let labels = queries
        .iter()
        .map(|&q| {
            for (c, r) in row.iter_mut().enumerate() {
                *r = weights[(q, c)];
            }
            weighted_vote(&row, &classes, k, ds.n_classes()).class
        })
        .collect();
    Ok(Predictions {
        indices: queries.to_vec(),
        labels,
    })
}

/// Predictions of `algorithm` for `queries` (default: every unlabeled
/// sample).
pub fn predict(
    ds: &Dataset,
    algorithm: Algorithm,
    k: usize,
    cfg: &MethodConfig,
    queries: Option<&[usize]>,
) -> Result<Predictions> {
    let all;
    let queries = match queries {
        Some(q) => q,
        None => {
            all = ds.unlabeled_indices();
            &all
        }
    };
    if let Some(&q) = queries.iter().find(|&&q| q >= ds.n()) {
        return Err(MknnError::IndexOutOfRange {
            index: q,
            len: ds.n(),
        });
    }
    match algorithm {
        Algorithm::Knn => baselines::knn_predict(ds, k, queries, baselines::Weighting::Uniform),
        Algorithm::Wknn => {
            baselines::knn_predict(ds, k, queries, baselines::Weighting::InverseDistance)
        }
        Algorithm::Gknn => baselines::gknn_predict(ds, k, cfg.geo_neighbors, queries),
        Algorithm::Mknn => mknn_predict(ds, cfg, k, queries),
    }
}
