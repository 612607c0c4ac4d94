//! Inductive classification of new samples against a frozen mkNN model.
//!
//! A new sample is written as a convex combination of its Euclidean
//! neighbors in the fitted set; the same combination of the neighbors' TRW
//! weight rows stands in for its own, so the TRW matrix is never refitted.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::classify::MknnModel;
use crate::data::Label;
use crate::error::{MknnError, Result};
use crate::neighbors::nearest_among;
use crate::optimize::{reconstruct_weights, solve_simplex_lsq, SimplexWeights};

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineResult {
    pub predicted_class: Label,
    /// Per-class vote scores, index `c - 1` for class `c`.
    pub scores: Vec<f64>,
    /// Reconstructed TRW weights to the labeled samples, in
    /// [`MknnModel::labeled`] order.
    pub weights_to_labeled: Vec<f64>,
    /// Reconstructed weights to every fitted sample, when requested.
    pub full_weights: Option<Vec<f64>>,
    /// Squared reconstruction error of the sample itself.
    pub recon_error: f64,
    pub z: SimplexWeights,
    /// Fitted samples used for the reconstruction, nearest first.
    pub neighbors: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OnlineStats {
    pub points: u64,
    pub solve_nanos: u64,
}

#[derive(Debug)]
pub struct OnlineSession {
    model: MknnModel,
    k_recon: usize,
    full_rows: bool,
    points: AtomicU64,
    solve_nanos: AtomicU64,
}

impl OnlineSession {
    /// Reconstructs from the model's `k` neighbors by default.
    pub fn new(model: MknnModel) -> Self {
        let k_recon = model.k();
        Self {
            model,
            k_recon,
            full_rows: false,
            points: AtomicU64::new(0),
            solve_nanos: AtomicU64::new(0),
        }
    }

    pub fn with_k_recon(mut self, k_recon: usize) -> Result<Self> {
        if k_recon == 0 {
            return Err(MknnError::param("k_recon", "must be positive"));
        }
        self.k_recon = k_recon;
        Ok(self)
    }

    /// Also reconstruct full-length weight rows (all fitted samples).
    pub fn with_full_rows(mut self, full_rows: bool) -> Self {
        self.full_rows = full_rows;
        self
    }

    pub fn model(&self) -> &MknnModel {
        &self.model
    }

    pub fn k_recon(&self) -> usize {
        self.k_recon
    }

    pub fn stats(&self) -> OnlineStats {
        OnlineStats {
            points: self.points.load(Ordering::Relaxed),
            solve_nanos: self.solve_nanos.load(Ordering::Relaxed),
        }
    }

    pub fn classify_online(&self, x: &[f64]) -> Result<OnlineResult> {
        let start = Instant::now();
        let result = self.classify_inner(x);
        let nanos = u64::try_from(start.elapsed().as_nanos()).unwrap_or(u64::MAX);
        self.points.fetch_add(1, Ordering::Relaxed);
        self.solve_nanos.fetch_add(nanos, Ordering::Relaxed);
        result
    }

    fn classify_inner(&self, x: &[f64]) -> Result<OnlineResult> {
        let ds = self.model.dataset();
        if x.len() != ds.dim() {
            return Err(MknnError::DimensionMismatch {
                expected: ds.dim(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MknnError::NonFinite("online sample"));
        }
        let near = nearest_among(ds.samples(), ds.dim(), x, 0..ds.n(), self.k_recon);
        let neighbors: Vec<usize> = near.iter().map(|p| p.1).collect();
        let basis: Vec<&[f64]> = neighbors.iter().map(|&j| ds.row(j)).collect();
        let (z, report) = solve_simplex_lsq(x, &basis)?;

        let labeled_rows: Vec<Vec<f64>> = neighbors
            .iter()
            .map(|&j| self.model.weights_to_labeled(j))
            .collect();
        let refs: Vec<&[f64]> = labeled_rows.iter().map(Vec::as_slice).collect();
        let weights_to_labeled = reconstruct_weights(&refs, &z)?;

        let full_weights = if self.full_rows {
            let w = self.model.trw().sym_weights();
            let rows: Vec<Vec<f64>> = neighbors
                .iter()
                .map(|&j| (0..ds.n()).map(|c| w[(j, c)]).collect())
                .collect();
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            Some(reconstruct_weights(&refs, &z)?)
        } else {
            None
        };

        let vote = self.model.vote(&weights_to_labeled);
        Ok(OnlineResult {
            predicted_class: vote.class,
            scores: vote.scores,
            weights_to_labeled,
            full_weights,
            recon_error: report.objective,
            z,
            neighbors,
        })
    }

    /// Classifies each sample independently against the frozen model.
    pub fn batch_online(&self, xs: &[Vec<f64>]) -> Result<OnlineBatch> {
        let mut results = Vec::with_capacity(xs.len());
        let mut latencies = Vec::with_capacity(xs.len());
        for x in xs {
            let start = Instant::now();
            results.push(self.classify_online(x)?);
            latencies.push(start.elapsed());
        }
        let total = latencies.iter().sum();
        Ok(OnlineBatch {
            results,
            latencies,
            total,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineBatch {
    pub results: Vec<OnlineResult>,
    pub latencies: Vec<Duration>,
    pub total: Duration,
}
