//! Semi-supervised nearest-neighbor classification on manifold-shaped data.
//!
//! Labeled samples impose must-link and cannot-link constraints on a Gaussian
//! similarity graph, which is then turned into a tired-random-walk (TRW)
//! similarity `(I - alpha P)^-1`. Unlabeled samples are classified by a kNN
//! vote in TRW-weight space, and new samples can be classified online by
//! reconstructing their weights from their Euclidean neighbors.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod neighbors;
pub mod online;
pub mod optimize;
pub mod trw;

pub use classify::{fit_mknn, predict, Algorithm, MethodConfig, MknnModel, Predictions, TuneGrid};
pub use data::{split, Dataset, Label, SplitMode, SplitSpec};
pub use error::{MknnError, Result};
pub use faer::Mat;
pub use graph::{build_constrained_graph, ConstrainedGraph, GraphConfig, StrengthenedTree};
pub use metrics::{error_rate, rmse, ErrorReport};
pub use online::{OnlineResult, OnlineSession};
pub use optimize::{reconstruct_weights, solve_simplex_lsq, QpReport, SimplexWeights};
pub use trw::{TrwConfig, TrwModel, TrwRoute};
