use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use mknn_core::classify::{
    mean_nn_distance, tune as tune_grid, DEFAULT_ALPHAS, DEFAULT_GEO_NEIGHBORS, SIGMA_MULTIPLES,
};
use mknn_core::data::{
    load_csv, make_synthetic_with, read_points, write_csv, CsvOptions, SyntheticSpec,
};
use mknn_core::experiment::{
    run_bench, run_online, run_rmse, run_stream, BenchConfig, LabelsPerClass, OnlineConfig,
    OnlineSummary, RmseConfig, RmseReport,
};
use mknn_core::metrics::{write_curves_csv, write_errors_csv, write_jsonl};
use mknn_core::{split, Dataset, Label, MethodConfig, SplitSpec, TuneGrid};
use serde::Serialize;

use crate::args::{
    BenchArgs, DataArgs, GridArgs, LabelCounts, MethodArgs, OnlineArgs, RmseArgs, SynthArgs,
    TuneArgs,
};

pub fn synth(a: &SynthArgs) -> anyhow::Result<()> {
    let mut spec = SyntheticSpec::new(a.kind, a.per_class, a.noise, a.seed);
    if let Some(b) = a.bridges {
        spec = spec.with_bridges(b);
    }
    let ds = make_synthetic_with(&spec)?;
    write_atomic(&a.out, |w| Ok(write_csv(&ds, w)?))?;
    println!("n={} d={} classes={}", ds.n(), ds.dim(), ds.n_classes());
    Ok(())
}

pub fn bench(a: &BenchArgs) -> anyhow::Result<()> {
    let ds = load(&a.data)?;
    let cfg = BenchConfig {
        algorithms: a.algorithms.0.clone(),
        k_values: a.k.0.clone(),
        labels_per_class: match &a.labels_per_class {
            LabelCounts::TiedToK => LabelsPerClass::TiedToK,
            LabelCounts::Fixed(c) => LabelsPerClass::Fixed(c.0.clone()),
        },
        seeds: (a.seed_start..a.seed_start + a.seeds).collect(),
        base: method(&ds, &a.method),
        grid: (!a.no_tune).then(|| grid(&ds, &a.grid)),
    };
    let out = run_bench(&ds, &cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_atomic(&a.out.join("errors.csv"), |w| {
        Ok(write_errors_csv(&out.reports, w)?)
    })?;
    write_atomic(&a.out.join("curves.csv"), |w| {
        Ok(write_curves_csv(&out.reports, w)?)
    })?;
    write_atomic(&a.out.join("summary.jsonl"), |w| {
        Ok(write_jsonl(&out.reports, w)?)
    })?;
    write_atomic(&a.out.join("runs.jsonl"), |w| {
        Ok(write_jsonl(&out.records, w)?)
    })?;
    println!("algorithm  k  labels/class  mean     stddev");
    for r in &out.reports {
        println!(
            "{:<9} {:>2}  {:>12}  {:.4}  {:.4}",
            r.algorithm, r.k, r.labels_per_class, r.mean, r.stddev
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct OnlineSummaryFile<'a> {
    sigma: f64,
    alpha: f64,
    k: usize,
    k_recon: usize,
    labels_per_class: usize,
    seed: u64,
    #[serde(flatten)]
    summary: &'a OnlineSummary,
}

pub fn online(a: &OnlineArgs) -> anyhow::Result<()> {
    let ds = load(&a.data)?;
    let cfg = OnlineConfig {
        labels_per_class: a.labels_per_class,
        online_count: a.online_count,
        seed: a.seed,
        k: a.k,
        method: method(&ds, &a.method),
        k_recon: a.k_recon,
        refit: !a.no_refit,
    };
    let outcome = match &a.stream {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let xs = read_points(file).with_context(|| format!("reading {}", path.display()))?;
            run_stream(&ds, &xs, &cfg)?
        }
        None => run_online(&ds, &cfg)?,
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let name =
        |c: Option<Label>| c.map_or(String::new(), |c| ds.class_names()[c as usize - 1].clone());
    write_atomic(&a.out.join("online.csv"), |w| {
        writeln!(w, "index,truth,online,refit,recon_error")?;
        for p in &outcome.points {
            writeln!(
                w,
                "{},{},{},{},{:?}",
                p.index,
                name(p.truth),
                name(Some(p.online)),
                name(p.refit),
                p.recon_error
            )?;
        }
        Ok(())
    })?;
    let summary = OnlineSummaryFile {
        sigma: cfg.method.graph.sigma,
        alpha: cfg.method.trw.alpha,
        k: cfg.k,
        k_recon: outcome.session.k_recon(),
        labels_per_class: cfg.labels_per_class,
        seed: cfg.seed,
        summary: &outcome.summary,
    };
    write_json(&a.out.join("summary.json"), &summary)?;
    write_json(&a.out.join("timings.json"), &outcome.timings)?;

    let s = &outcome.summary;
    let t = &outcome.timings;
    println!("fitted={} streamed={}", s.fitted, s.online_count);
    if let Some(e) = s.online_error {
        println!("online error {e:.4}");
    }
    if let Some(e) = s.refit_error {
        println!("refit error {e:.4}");
    }
    if let Some(ag) = s.agreement {
        println!("agreement {ag:.4}");
    }
    println!(
        "fit {:.3}s online {:.6}s (p50 {:.2e}s)",
        t.fit_seconds, t.online_seconds, t.latency.p50
    );
    if let (Some(r), Some(x)) = (t.refit_seconds, t.speedup) {
        println!("refit {r:.3}s speedup {x:.1}x");
    }
    Ok(())
}

#[derive(Serialize)]
struct RmseFile<'a> {
    sigma: f64,
    alpha: f64,
    labels_per_class: usize,
    seed: u64,
    #[serde(flatten)]
    report: &'a RmseReport,
}

pub fn rmse(a: &RmseArgs) -> anyhow::Result<()> {
    let ds = load(&a.data)?;
    let cfg = RmseConfig {
        k: a.k,
        labels_per_class: a.labels_per_class,
        seed: a.seed,
        method: method(&ds, &a.method),
    };
    let report = run_rmse(&ds, &cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_json(
        &a.out.join("rmse.json"),
        &RmseFile {
            sigma: cfg.method.graph.sigma,
            alpha: cfg.method.trw.alpha,
            labels_per_class: cfg.labels_per_class,
            seed: cfg.seed,
            report: &report,
        },
    )?;
    println!("sample rmse {:.4}%", report.sample_rmse);
    println!("weight rmse {:.4}%", report.weight_rmse);
    Ok(())
}

pub fn tune(a: &TuneArgs) -> anyhow::Result<()> {
    let ds = load(&a.data)?;
    let base = method(&ds, &a.method);
    let g = grid(&ds, &a.grid);
    let train = split(&ds, &SplitSpec::new(a.labels_per_class, a.seed))?;
    let out = tune_grid(&train, a.algorithm, a.k, &g, &base, a.seed)?;
    let text = format!(
        "# algorithm = {}, k = {}, labels per class = {}, seed = {}, cv error = {:?}\n\
         sigma = {:?}\nalpha = {:?}\ngeo-neighbors = {}\n",
        a.algorithm,
        a.k,
        a.labels_per_class,
        a.seed,
        out.best_error,
        out.best.graph.sigma,
        out.best.trw.alpha,
        out.best.geo_neighbors
    );
    match &a.out {
        Some(path) => {
            write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))?;
            println!(
                "best sigma={:?} alpha={:?} geo-neighbors={} cv error={:.4} ({} points)",
                out.best.graph.sigma,
                out.best.trw.alpha,
                out.best.geo_neighbors,
                out.best_error,
                out.evaluations.len()
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load(a: &DataArgs) -> anyhow::Result<Dataset> {
    let ds = match &a.data {
        Some(path) => {
            let mut opts = CsvOptions {
                label_column: a.label_column.parse().expect("infallible"),
                ..CsvOptions::default()
            };
            opts.unlabeled_markers
                .extend(a.unlabeled_marker.iter().cloned());
            load_csv(path, &opts).with_context(|| format!("loading {}", path.display()))?
        }
        None => {
            let mut spec = SyntheticSpec::new(a.kind, a.per_class, a.noise, a.data_seed);
            if let Some(b) = a.bridges {
                spec = spec.with_bridges(b);
            }
            make_synthetic_with(&spec)?
        }
    };
    Ok(if a.standardize { ds.standardized() } else { ds })
}

fn method(ds: &Dataset, a: &MethodArgs) -> MethodConfig {
    let sigma = a
        .sigma
        .unwrap_or_else(|| a.sigma_scale * mean_nn_distance(ds));
    let mut cfg = MethodConfig::new(sigma, a.alpha, a.geo_neighbors);
    cfg.trw.route = a.route;
    cfg.graph.tree_depth = a.tree_depth;
    cfg.graph.theta_fraction = a.theta_fraction;
    cfg
}

fn grid(ds: &Dataset, a: &GridArgs) -> TuneGrid {
    let scale = mean_nn_distance(ds);
    let scales = a
        .sigma_scales
        .as_ref()
        .map_or(SIGMA_MULTIPLES.to_vec(), |l| l.0.clone());
    let mut g = TuneGrid::new(
        scales.iter().map(|m| m * scale).collect(),
        a.alphas
            .as_ref()
            .map_or(DEFAULT_ALPHAS.to_vec(), |l| l.0.clone()),
        a.geo_grid
            .as_ref()
            .map_or(DEFAULT_GEO_NEIGHBORS.to_vec(), |l| l.0.clone()),
    );
    g.folds = a.folds;
    g
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

/// Writes through a temporary file in the target directory, then renames it
/// over `path`.
fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(tmp);
    body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    let tmp = w
        .into_inner()
        .map_err(|e| e.into_error())
        .with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
