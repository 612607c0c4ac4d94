//! Error rates, relative reconstruction error and report serialization.

use std::io::Write;
use std::time::Duration;

use faer::Mat;
use serde::Serialize;

use crate::data::Label;
use crate::error::{MknnError, Result};

/// Fraction of positions where `pred` and `truth` differ.
pub fn error_rate(pred: &[Label], truth: &[Label]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(MknnError::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(MknnError::param("pred", "nothing to score"));
    }
    let wrong = pred.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / pred.len() as f64)
}

/// `|T - R|_F^2 / |T|_F^2 * 100` over two equally long flattened matrices.
pub fn rmse(truth: &[f64], recon: &[f64]) -> Result<f64> {
    if truth.len() != recon.len() {
        return Err(MknnError::DimensionMismatch {
            expected: truth.len(),
            actual: recon.len(),
        });
    }
    let denom: f64 = truth.iter().map(|t| t * t).sum();
    if !(denom > 0.0) {
        return Err(MknnError::param("truth", "zero norm"));
    }
    let num: f64 = truth
        .iter()
        .zip(recon)
        .map(|(t, r)| (t - r) * (t - r))
        .sum();
    Ok(100.0 * num / denom)
}

pub fn rmse_mat(truth: &Mat<f64>, recon: &Mat<f64>) -> Result<f64> {
    if truth.nrows() != recon.nrows() || truth.ncols() != recon.ncols() {
        return Err(MknnError::DimensionMismatch {
            expected: truth.nrows() * truth.ncols(),
            actual: recon.nrows() * recon.ncols(),
        });
    }
    let flat = |m: &Mat<f64>| -> Vec<f64> {
        (0..m.ncols())
            .flat_map(|j| (0..m.nrows()).map(move |i| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect()
    };
    rmse(&flat(truth), &flat(recon))
}

/// Error rates of one (algorithm, k, labels per class) cell across seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub algorithm: String,
    pub k: usize,
    pub labels_per_class: usize,
    pub seeds: Vec<u64>,
    pub per_seed_errors: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub stddev: f64,
}

impl ErrorReport {
    pub fn new(
        algorithm: impl Into<String>,
        k: usize,
        labels_per_class: usize,
        seeds: Vec<u64>,
        per_seed_errors: Vec<f64>,
    ) -> Result<Self> {
        if seeds.len() != per_seed_errors.len() {
            return Err(MknnError::DimensionMismatch {
                expected: seeds.len(),
                actual: per_seed_errors.len(),
            });
        }
        let (mean, stddev) = mean_std(&per_seed_errors);
        Ok(Self {
            algorithm: algorithm.into(),
            k,
            labels_per_class,
            seeds,
            per_seed_errors,
            mean,
            stddev,
        })
    }
}

/// Mean and sample standard deviation. NaN mean for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn write_errors_csv<W: Write>(reports: &[ErrorReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "k", "labels_per_class", "seed", "error"])
        .map_err(csv_err)?;
    for r in reports {
        for (seed, e) in r.seeds.iter().zip(&r.per_seed_errors) {
            w.write_record([
                r.algorithm.clone(),
                r.k.to_string(),
                r.labels_per_class.to_string(),
                seed.to_string(),
                format!("{e:?}"),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| MknnError::Format(e.to_string()))
}

/// One row per report: the mean-error curve points and their spread.
pub fn write_curves_csv<W: Write>(reports: &[ErrorReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "algorithm",
        "k",
        "labels_per_class",
        "seeds",
        "mean",
        "stddev",
    ])
    .map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.algorithm.clone(),
            r.k.to_string(),
            r.labels_per_class.to_string(),
            r.seeds.len().to_string(),
            format!("{:?}", r.mean),
            format!("{:?}", r.stddev),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| MknnError::Format(e.to_string()))
}

pub fn write_jsonl<W: Write, T: Serialize>(items: &[T], mut out: W) -> Result<()> {
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| MknnError::Format(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| MknnError::Format(e.to_string()))?;
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> MknnError {
    MknnError::Format(e.to_string())
}

/// Per-call latency summary in seconds, nearest-rank percentiles.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LatencySummary {
    pub count: usize,
    pub total: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl LatencySummary {
    pub fn from_durations(ds: &[Duration]) -> Self {
        let mut secs: Vec<f64> = ds.iter().map(Duration::as_secs_f64).collect();
        if secs.is_empty() {
            return Self::default();
        }
        secs.sort_by(f64::total_cmp);
        let rank =
            |q: f64| secs[((q * secs.len() as f64).ceil() as usize).clamp(1, secs.len()) - 1];
        Self {
            count: secs.len(),
            total: secs.iter().sum(),
            p50: rank(0.5),
            p90: rank(0.9),
            p99: rank(0.99),
            max: secs[secs.len() - 1],
        }
    }
}
