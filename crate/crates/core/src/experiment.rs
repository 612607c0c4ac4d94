//! Seeded experiment protocols: repeated-split benchmarks, online versus
//! refit comparison, and leave-one-out reconstruction error.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{fit_mknn, mknn_predict, predict, tune, Algorithm, MethodConfig, TuneGrid};
use crate::data::{split, Dataset, Label, SplitSpec};
use crate::error::{MknnError, Result};
use crate::graph::build_constrained_graph;
use crate::metrics::{error_rate, rmse, ErrorReport, LatencySummary};
use crate::neighbors::nearest_among;
use crate::online::OnlineSession;
use crate::optimize::solve_simplex_lsq;
use crate::trw::sym_weight_columns;

/// How many labels per class each split keeps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelsPerClass {
    /// The same as the classifier's k, one split family per k.
    TiedToK,
    /// Every listed count, each evaluated at every k.
    Fixed(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub algorithms: Vec<Algorithm>,
    pub k_values: Vec<usize>,
    pub labels_per_class: LabelsPerClass,
    pub seeds: Vec<u64>,
    /// Parameters used as-is when `grid` is `None`, and as the template for
    /// grid points otherwise.
    pub base: MethodConfig,
    /// Tune per (algorithm, k, split) by cross-validation on the split's
    /// labeled samples. Splits with fewer labels per class than folds use
    /// `base`.
    pub grid: Option<TuneGrid>,
}

/// One (algorithm, k, labels per class, seed) evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub algorithm: Algorithm,
    pub k: usize,
    pub labels_per_class: usize,
    pub seed: u64,
    pub error: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub geo_neighbors: usize,
    pub cv_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOutcome {
    pub records: Vec<BenchRecord>,
    /// One report per (algorithm, k, labels per class), seeds aggregated.
    pub reports: Vec<ErrorReport>,
}

/// For every labels-per-class value and seed: split, then for every
/// algorithm and k tune (optionally), fit, classify the unlabeled samples
/// and score them against ground truth.
pub fn run_bench(ds: &Dataset, cfg: &BenchConfig) -> Result<BenchOutcome> {
    let cells: Vec<(usize, Vec<usize>)> = match &cfg.labels_per_class {
        LabelsPerClass::TiedToK => cfg.k_values.iter().map(|&k| (k, vec![k])).collect(),
        LabelsPerClass::Fixed(ls) => ls.iter().map(|&l| (l, cfg.k_values.clone())).collect(),
    };
    if cfg.algorithms.is_empty()
        || cfg.k_values.is_empty()
        || cells.is_empty()
        || cfg.seeds.is_empty()
    {
        return Err(MknnError::param(
            "bench",
            "algorithms, k values, label counts and seeds must be non-empty",
        ));
    }
    let jobs: Vec<(usize, &[usize], u64)> = cells
        .iter()
        .flat_map(|(l, ks)| cfg.seeds.iter().map(move |&s| (*l, ks.as_slice(), s)))
        .collect();
    let per_job: Vec<Vec<BenchRecord>> = jobs
        .par_iter()
        .map(|&(lpc, ks, seed)| bench_split(ds, cfg, lpc, ks, seed))
        .collect::<Result<_>>()?;
    let mut records: Vec<BenchRecord> = per_job.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.algorithm, a.labels_per_class, a.k, a.seed).cmp(&(
            b.algorithm,
            b.labels_per_class,
            b.k,
            b.seed,
        ))
    });

    let mut reports = Vec::new();
    for &algorithm in &cfg.algorithms {
        for (lpc, ks) in &cells {
            for &k in ks {
                let cell: Vec<&BenchRecord> = records
                    .iter()
                    .filter(|r| r.algorithm == algorithm && r.labels_per_class == *lpc && r.k == k)
                    .collect();
                reports.push(ErrorReport::new(
                    algorithm.name(),
                    k,
                    *lpc,
                    cell.iter().map(|r| r.seed).collect(),
                    cell.iter().map(|r| r.error).collect(),
                )?);
            }
        }
    }
    Ok(BenchOutcome { records, reports })
}

fn bench_split(
    ds: &Dataset,
    cfg: &BenchConfig,
    lpc: usize,
    ks: &[usize],
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    let train = split(ds, &SplitSpec::new(lpc, seed))?;
    let mut out = Vec::new();
    for &algorithm in &cfg.algorithms {
        for &k in ks {
            let (params, cv) = match &cfg.grid {
                Some(grid) if lpc >= grid.folds => {
                    let t = tune(&train, algorithm, k, grid, &cfg.base, seed)?;
                    (t.best, Some(t.best_error))
                }
                _ => (cfg.base.clone(), None),
            };
            let pred = predict(&train, algorithm, k, &params, None)?;
            out.push(BenchRecord {
                algorithm,
                k,
                labels_per_class: lpc,
                seed,
                error: pred.error_rate(&train)?,
                sigma: params.graph.sigma,
                alpha: params.trw.alpha,
                geo_neighbors: params.geo_neighbors,
                cv_error: cv,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct OnlineConfig {
    pub labels_per_class: usize,
    pub online_count: usize,
    pub seed: u64,
    pub k: usize,
    pub method: MethodConfig,
    /// Reconstruction neighbors; defaults to `k`.
    pub k_recon: Option<usize>,
    /// Also classify every streamed sample by a full transductive refit.
    pub refit: bool,
}

/// Per streamed sample outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OnlinePoint {
    /// Row of the source dataset.
    pub index: usize,
    pub truth: Option<Label>,
    pub online: Label,
    pub refit: Option<Label>,
    pub recon_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OnlineSummary {
    pub fitted: usize,
    pub online_count: usize,
    pub agreement: Option<f64>,
    pub online_error: Option<f64>,
    pub refit_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OnlineTimings {
    pub fit_seconds: f64,
    pub online_seconds: f64,
    pub refit_seconds: Option<f64>,
    pub speedup: Option<f64>,
    pub latency: LatencySummary,
}

#[derive(Clone, Debug)]
pub struct OnlineOutcome {
    pub points: Vec<OnlinePoint>,
    pub summary: OnlineSummary,
    pub timings: OnlineTimings,
    /// The fitted session, for further inspection.
    pub session: std::sync::Arc<OnlineSession>,
}

/// Splits the labeled set, holds `online_count` random unlabeled samples
/// out as a stream, fits mkNN on the rest and classifies the stream against
/// the frozen model (and, if requested, by refitting with each sample
/// appended).
pub fn run_online(ds: &Dataset, cfg: &OnlineConfig) -> Result<OnlineOutcome> {
    let train = split(ds, &SplitSpec::new(cfg.labels_per_class, cfg.seed))?;
    let unlabeled = train.unlabeled_indices();
    if cfg.online_count >= unlabeled.len() {
        return Err(MknnError::param(
            "online_count",
            format!("must be below the {} unlabeled samples", unlabeled.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6f6e_6c69_6e65);
    let mut stream: Vec<usize> = sample(&mut rng, unlabeled.len(), cfg.online_count)
        .into_iter()
        .map(|p| unlabeled[p])
        .collect();
    stream.sort_unstable();
    let mut held = vec![false; train.n()];
    stream.iter().for_each(|&i| held[i] = true);
    let kept: Vec<usize> = (0..train.n()).filter(|&i| !held[i]).collect();
    let fitted = train.select(&kept)?;

    let xs: Vec<Vec<f64>> = stream.iter().map(|&i| train.row(i).to_vec()).collect();
    let truth: Vec<Option<Label>> = stream.iter().map(|&i| train.truth()[i]).collect();
    evaluate_stream(&fitted, &xs, &stream, &truth, cfg)
}

/// Fits mkNN on a split of `ds` (no samples held out) and classifies the
/// external samples `xs` against it. `online_count` is ignored; streamed
/// samples have no ground truth.
pub fn run_stream(ds: &Dataset, xs: &[Vec<f64>], cfg: &OnlineConfig) -> Result<OnlineOutcome> {
    let train = split(ds, &SplitSpec::new(cfg.labels_per_class, cfg.seed))?;
    let indices: Vec<usize> = (0..xs.len()).collect();
    evaluate_stream(&train, xs, &indices, &vec![None; xs.len()], cfg)
}

fn evaluate_stream(
    fitted: &Dataset,
    xs: &[Vec<f64>],
    indices: &[usize],
    truth: &[Option<Label>],
    cfg: &OnlineConfig,
) -> Result<OnlineOutcome> {
    let start = Instant::now();
    let model = fit_mknn(fitted, &cfg.method.graph, &cfg.method.trw, cfg.k)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let mut session = OnlineSession::new(model);
    if let Some(kr) = cfg.k_recon {
        session = session.with_k_recon(kr)?;
    }
    let batch = session.batch_online(xs)?;

    let mut refit_labels = Vec::new();
    let mut refit_time = Duration::ZERO;
    if cfg.refit {
        for x in xs {
            let start = Instant::now();
            let grown = fitted.with_appended(x)?;
            let p = mknn_predict(&grown, &cfg.method, cfg.k, &[grown.n() - 1])?;
            refit_time += start.elapsed();
            refit_labels.push(p.labels[0]);
        }
    }

    let points: Vec<OnlinePoint> = indices
        .iter()
        .enumerate()
        .map(|(p, &i)| OnlinePoint {
            index: i,
            truth: truth[p],
            online: batch.results[p].predicted_class,
            refit: refit_labels.get(p).copied(),
            recon_error: batch.results[p].recon_error,
        })
        .collect();

    let scored = |get: &dyn Fn(&OnlinePoint) -> Option<Label>| -> Option<f64> {
        let (pred, truth): (Vec<Label>, Vec<Label>) = points
            .iter()
            .filter_map(|p| Some((get(p)?, p.truth?)))
            .unzip();
        error_rate(&pred, &truth).ok()
    };
    let agreement = (cfg.refit && !points.is_empty()).then(|| {
        let same = points.iter().filter(|p| p.refit == Some(p.online)).count();
        same as f64 / points.len() as f64
    });
    let summary = OnlineSummary {
        fitted: fitted.n(),
        online_count: points.len(),
        agreement,
        online_error: scored(&|p| Some(p.online)),
        refit_error: scored(&|p| p.refit),
    };
    let online_seconds = batch.total.as_secs_f64();
    let refit_seconds = cfg.refit.then_some(refit_time.as_secs_f64());
    let timings = OnlineTimings {
        fit_seconds,
        online_seconds,
        refit_seconds,
        speedup: refit_seconds
            .filter(|_| online_seconds > 0.0)
            .map(|r| r / online_seconds),
        latency: LatencySummary::from_durations(&batch.latencies),
    };
    Ok(OnlineOutcome {
        points,
        summary,
        timings,
        session: std::sync::Arc::new(session),
    })
}

#[derive(Clone, Debug)]
pub struct RmseConfig {
    pub k: usize,
    pub labels_per_class: usize,
    pub seed: u64,
    pub method: MethodConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RmseReport {
    pub n: usize,
    pub k: usize,
    /// Relative error of the leave-one-out sample reconstructions, percent.
    pub sample_rmse: f64,
    /// Relative error of the reconstructed TRW weight rows, percent.
    pub weight_rmse: f64,
    /// Number of weight rows scored (the unlabeled samples).
    pub weight_rows: usize,
}

/// Leave-one-out reconstruction: every sample is rebuilt from its `k`
/// nearest other samples, and every unlabeled sample's TRW weights to the
/// labeled samples from the same combination of its neighbors' weights.
/// Labeled rows are excluded from the weight score because they contain the
/// sample's own diagonal entry, which no neighbor carries.
pub fn run_rmse(ds: &Dataset, cfg: &RmseConfig) -> Result<RmseReport> {
    let train = split(ds, &SplitSpec::new(cfg.labels_per_class, cfg.seed))?;
    let n = train.n();
    if cfg.k == 0 || cfg.k >= n {
        return Err(MknnError::param("k", "must be in 1..n"));
    }
    let labeled = train.labeled_indices();
    let mut gcfg = cfg.method.graph.clone();
    gcfg.tree_branch.get_or_insert(cfg.k);
    let graph = build_constrained_graph(&train, &gcfg)?;
    cfg.method.trw.validate()?;
    let w = sym_weight_columns(&graph, cfg.method.trw.alpha, &labeled)?;
    let row = |i: usize| -> Vec<f64> { (0..labeled.len()).map(|c| w[(i, c)]).collect() };

    type Row = (Vec<f64>, Option<(Vec<f64>, Vec<f64>)>);
    let solved: Vec<Row> = (0..n)
        .into_par_iter()
        .map(|i| {
            let near = nearest_among(
                train.samples(),
                train.dim(),
                train.row(i),
                (0..n).filter(|&j| j != i),
                cfg.k,
            );
            let basis: Vec<&[f64]> = near.iter().map(|p| train.row(p.1)).collect();
            let (z, _) = solve_simplex_lsq(train.row(i), &basis)?;
            let mut x_hat = vec![0.0; train.dim()];
            for (b, zj) in basis.iter().zip(z.as_slice()) {
                x_hat
                    .iter_mut()
                    .zip(b.iter())
                    .for_each(|(o, v)| *o += zj * v);
            }
            let weights = train.label(i).is_none().then(|| {
                let mut w_hat = vec![0.0; labeled.len()];
                for (p, zj) in near.iter().zip(z.as_slice()) {
                    w_hat
                        .iter_mut()
                        .zip(row(p.1))
                        .for_each(|(o, v)| *o += zj * v);
                }
                (row(i), w_hat)
            });
            Ok((x_hat, weights))
        })
        .collect::<Result<_>>()?;

    let x_hat: Vec<f64> = solved.iter().flat_map(|s| s.0.iter().copied()).collect();
    let (w_true, w_hat): (Vec<f64>, Vec<f64>) = solved
        .iter()
        .filter_map(|s| s.1.as_ref())
        .flat_map(|(t, r)| t.iter().copied().zip(r.iter().copied()))
        .unzip();
    Ok(RmseReport {
        n,
        k: cfg.k,
        sample_rmse: rmse(train.samples(), &x_hat)?,
        weight_rmse: rmse(&w_true, &w_hat)?,
        weight_rows: n - labeled.len(),
    })
}
