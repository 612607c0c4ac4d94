//! Datasets with partial labels, CSV ingestion, synthetic manifolds and
//! seeded labeled/unlabeled splits.
//!
//! A [`Dataset`] carries two label vectors. The *working* labels are what the
//! classifiers see; the *ground truth* is kept out of band so that scoring
//! the unlabeled points never leaks into training.

mod csv;
mod synthetic;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use self::csv::{
    load_csv, read_csv, read_points, save_csv, write_csv, CsvOptions, LabelColumn,
};
pub use self::synthetic::{make_synthetic, make_synthetic_with, SyntheticKind, SyntheticSpec};
use crate::error::{MknnError, Result};

/// Class code. Classes are numbered `1..=C`.
pub type Label = u32;

/// Sample matrix (rows are points) plus working and ground-truth labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<f64>,
    dim: usize,
    labels: Vec<Option<Label>>,
    truth: Vec<Option<Label>>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from row vectors. The ground truth starts equal to
    /// the working labels; the number of classes is the largest label seen.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Option<Label>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut samples = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(MknnError::Parse {
                    row: i + 1,
                    message: format!("expected {dim} features, found {}", row.len()),
                });
            }
            samples.extend_from_slice(row);
        }
        Self::from_flat(samples, dim, labels)
    }

    /// Builds a dataset from a row-major `n × dim` buffer.
    pub fn from_flat(samples: Vec<f64>, dim: usize, labels: Vec<Option<Label>>) -> Result<Self> {
        let n_classes = labels.iter().flatten().copied().max().unwrap_or(0);
        let class_names = (1..=n_classes).map(|c| c.to_string()).collect();
        Self::with_class_names(samples, dim, labels, class_names)
    }

    pub(crate) fn with_class_names(
        samples: Vec<f64>,
        dim: usize,
        labels: Vec<Option<Label>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(MknnError::EmptyDataset);
        }
        if dim == 0 {
            return Err(MknnError::InvalidDataset("zero feature columns".into()));
        }
        if samples.len() != labels.len() * dim {
            return Err(MknnError::DimensionMismatch {
                expected: labels.len() * dim,
                actual: samples.len(),
            });
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(MknnError::Parse {
                row: pos / dim + 1,
                message: "non-finite feature value".into(),
            });
        }
        let n_classes = class_names.len() as Label;
        if let Some(bad) = labels.iter().flatten().find(|&&c| c == 0 || c > n_classes) {
            return Err(MknnError::InvalidDataset(format!(
                "label {bad} outside 1..={n_classes}"
            )));
        }
        if labels.iter().all(Option::is_none) {
            return Err(MknnError::NoLabeledSamples);
        }
        Ok(Self {
            samples,
            dim,
            truth: labels.clone(),
            labels,
            class_names,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major sample buffer.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn labels(&self) -> &[Option<Label>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<Label> {
        self.labels[i]
    }

    /// Labels held out for scoring. `None` where the truth is unknown.
    pub fn truth(&self) -> &[Option<Label>] {
        &self.truth
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.labels[i].is_some())
            .collect()
    }

    pub fn unlabeled_indices(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.labels[i].is_none())
            .collect()
    }

    pub fn n_labeled(&self) -> usize {
        self.labels.iter().flatten().count()
    }

    /// Working-label count per class, indexed by `class - 1`.
    pub fn labeled_per_class(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &c in self.labels.iter().flatten() {
            counts[c as usize - 1] += 1;
        }
        counts
    }

    /// Replaces the working labels, keeping the ground truth.
    pub fn with_working_labels(&self, labels: Vec<Option<Label>>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(MknnError::DimensionMismatch {
                expected: self.n(),
                actual: labels.len(),
            });
        }
        if labels.iter().all(Option::is_none) {
            return Err(MknnError::NoLabeledSamples);
        }
        Ok(Self {
            labels,
            ..self.clone()
        })
    }

    /// Subset (or permutation) of the rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut samples = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        let mut truth = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n() {
                return Err(MknnError::IndexOutOfRange {
                    index: i,
                    len: self.n(),
                });
            }
            samples.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            truth.push(self.truth[i]);
        }
        let mut out = Self::with_class_names(samples, self.dim, labels, self.class_names.clone())?;
        out.truth = truth;
        Ok(out)
    }

    /// Appends one unlabeled sample with unknown truth.
    pub fn with_appended(&self, x: &[f64]) -> Result<Self> {
        if x.len() != self.dim {
            return Err(MknnError::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MknnError::NonFinite("appended sample"));
        }
        let mut out = self.clone();
        out.samples.extend_from_slice(x);
        out.labels.push(None);
        out.truth.push(None);
        Ok(out)
    }

    /// Per-feature z-score standardization. Constant features are centered
    /// but left unscaled.
    pub fn standardized(&self) -> Self {
        let n = self.n() as f64;
        let mut out = self.clone();
        for j in 0..self.dim {
            let mean = (0..self.n()).map(|i| self.row(i)[j]).sum::<f64>() / n;
            let var = (0..self.n())
                .map(|i| (self.row(i)[j] - mean).powi(2))
                .sum::<f64>()
                / n;
            let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            for i in 0..self.n() {
                out.samples[i * self.dim + j] = (self.row(i)[j] - mean) / scale;
            }
        }
        out
    }
}

/// How the labeled subset is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SplitMode {
    #[default]
    RandomPerClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub labels_per_class: usize,
    pub seed: u64,
    pub mode: SplitMode,
}

impl SplitSpec {
    pub fn new(labels_per_class: usize, seed: u64) -> Self {
        Self {
            labels_per_class,
            seed,
            mode: SplitMode::RandomPerClass,
        }
    }
}

/// Keeps exactly `labels_per_class` working labels per class, drawn from the
/// currently labeled rows; the rest become unlabeled. Ground truth is kept.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Dataset> {
    if spec.labels_per_class == 0 {
        return Err(MknnError::param("labels_per_class", "must be at least 1"));
    }
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, label) in ds.labels().iter().enumerate() {
        if let Some(c) = label {
            by_class.entry(*c).or_default().push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut keep = vec![None; ds.n()];
    for class in 1..=ds.n_classes() as Label {
        let members = by_class.get(&class).map_or(&[][..], Vec::as_slice);
        if members.len() < spec.labels_per_class {
            return Err(MknnError::InsufficientClassSamples {
                class,
                available: members.len(),
                requested: spec.labels_per_class,
            });
        }
        for pick in sample(&mut rng, members.len(), spec.labels_per_class) {
            keep[members[pick]] = Some(class);
        }
    }
    ds.with_working_labels(keep)
}
