mod common;

use common::*;
use mknn_core::classify::{
    gknn_baseline, knn_baseline, mean_nn_distance, weighted_vote, wknn_baseline,
};
use mknn_core::data::{make_synthetic, SyntheticKind};
use mknn_core::experiment::{run_bench, BenchConfig, LabelsPerClass};
use mknn_core::{
    fit_mknn, predict, split, Algorithm, ConstrainedGraph, Dataset, GraphConfig, Label,
    MethodConfig, MknnModel, SplitSpec, TrwConfig, TrwModel,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn hand_graph_follows_the_walk_not_the_ruler() {
    // A(0, class 1) - 1 - 2 - q(3) ~ B(3.9, class 2) - 5, the q-B link weak
    let xs = [0.0, 1.0, 2.0, 3.0, 3.9, 6.0];
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let ds = Dataset::from_rows(&rows, vec![Some(1), None, None, None, Some(2), None]).unwrap();
    let mut w = vec![vec![0.0; 6]; 6];
    for (i, j, v) in [
        (0, 1, 0.9),
        (1, 2, 0.9),
        (2, 3, 0.9),
        (3, 4, 0.05),
        (4, 5, 0.9),
    ] {
        w[i][j] = v;
        w[j][i] = v;
    }
    let alpha = 0.9;
    let graph = ConstrainedGraph::from_weights(to_mat(&w), GraphConfig::new(1.0)).unwrap();
    let trw = TrwModel::fit(&graph, &TrwConfig::with_alpha(alpha)).unwrap();

    let x = resolvent(&row_normalize(&w), alpha);
    let sym = |i: usize, j: usize| 0.5 * (x[i][j] + x[j][i]);
    for i in 0..6 {
        for j in 0..6 {
            assert!((trw.sym_weights()[(i, j)] - sym(i, j)).abs() < 1e-12);
        }
    }
    assert!(
        sym(3, 0) > sym(3, 4),
        "oracle: A is the walk-nearest labeled sample"
    );

    let model = MknnModel::from_parts(trw, ds.clone(), 1).unwrap();
    assert_eq!(model.classify_point(3).unwrap().class, 1);
    assert_eq!(knn_baseline(&ds, 1).unwrap().labels[2], 2);
}

fn blobs(centers: &[[f64; 2]], per: usize, sd: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, ctr) in centers.iter().enumerate() {
        for _ in 0..per {
            rows.push(vec![
                ctr[0] + noise.sample(&mut r),
                ctr[1] + noise.sample(&mut r),
            ]);
            labels.push(Some(c as Label + 1));
        }
    }
    Dataset::from_rows(&rows, labels).unwrap()
}

#[test]
fn wknn_matches_weighted_vote_oracle() {
    let ds = split(
        &blobs(&[[0.0, 0.0], [2.0, 0.5], [1.0, 2.0]], 40, 0.8, 3),
        &SplitSpec::new(5, 1),
    )
    .unwrap();
    let rows: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.row(i).to_vec()).collect();
    let labeled = ds.labeled_indices();
    let pred = wknn_baseline(&ds, 5).unwrap();
    assert!(pred.indices.len() >= 100);
    for (&q, &got) in pred.indices.iter().zip(&pred.labels).take(100) {
        let mut scores = [0.0; 3];
        for j in brute_nearest(&rows, &rows[q], &labeled, 5) {
            scores[ds.label(j).unwrap() as usize - 1] += 1.0 / (euclid(&rows[q], &rows[j]) + 1e-12);
        }
        let best = (0..3).fold(0, |b, c| if scores[c] > scores[b] { c } else { b });
        assert_eq!(got, best as Label + 1, "query {q}");
    }
}

#[test]
fn gknn_matches_shortest_path_oracle_on_spirals() {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..2 {
        for s in 0..25 {
            let t = 1.0 + 0.2 * s as f64;
            let a = t + std::f64::consts::PI * c as f64;
            rows.push(vec![t * a.cos(), t * a.sin()]);
            labels.push((s == 0).then_some(c as Label + 1));
        }
    }
    let truth: Vec<Label> = (0..50).map(|i| if i < 25 { 1 } else { 2 }).collect();
    let ds = Dataset::from_rows(&rows, labels).unwrap();
    let n = rows.len();
    let geo = 2;

    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        for j in brute_nearest(&rows, &rows[i], &others, geo) {
            let e = euclid(&rows[i], &rows[j]);
            d[i][j] = e;
            d[j][i] = e;
        }
    }
    let sp = floyd_warshall(d);
    let labeled = ds.labeled_indices();
    let pred = gknn_baseline(&ds, 1, geo).unwrap();
    let eu = knn_baseline(&ds, 1).unwrap();
    let mut differ = 0;
    for (p, &q) in pred.indices.iter().enumerate() {
        let nearest = labeled
            .iter()
            .copied()
            .min_by(|&a, &b| sp[a][q].total_cmp(&sp[b][q]).then(a.cmp(&b)))
            .unwrap();
        assert!(sp[nearest][q].is_finite());
        assert_eq!(pred.labels[p], ds.label(nearest).unwrap(), "query {q}");
        assert_eq!(pred.labels[p], truth[q]);
        differ += usize::from(eu.labels[p] != pred.labels[p]);
    }
    assert!(
        differ > 0,
        "the Euclidean and path metrics should disagree somewhere"
    );
}

fn two_arcs_split(per_class: usize, lpc: usize, seed: u64) -> Dataset {
    let ds = make_synthetic(SyntheticKind::TwoArcs, per_class, 0.05, 7).unwrap();
    split(&ds, &SplitSpec::new(lpc, seed)).unwrap()
}

#[test]
fn permuting_samples_permutes_predictions() {
    let ds = two_arcs_split(40, 3, 2);
    let cfg = MethodConfig::new(4.0 * mean_nn_distance(&ds), 0.9, 8);
    let base = predict(&ds, Algorithm::Mknn, 3, &cfg, None).unwrap();
    let base_labels = base.fill(&ds);
    let mut r = rng(5);
    for _ in 0..3 {
        let mut perm: Vec<usize> = (0..ds.n()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let shuffled = ds.select(&perm).unwrap();
        let got = predict(&shuffled, Algorithm::Mknn, 3, &cfg, None)
            .unwrap()
            .fill(&shuffled);
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(got[new], base_labels[old]);
        }
    }
}

#[test]
fn mknn_and_knn_agree_on_separated_blobs() {
    let ds = split(
        &blobs(&[[0.0, 0.0], [10.0, 0.0]], 100, 1.0, 9),
        &SplitSpec::new(10, 4),
    )
    .unwrap();
    let cfg = MethodConfig::new(4.0 * mean_nn_distance(&ds), 0.99, 8);
    let m = predict(&ds, Algorithm::Mknn, 3, &cfg, None).unwrap();
    let k = knn_baseline(&ds, 3).unwrap();
    let disagree = m
        .labels
        .iter()
        .zip(&k.labels)
        .filter(|(a, b)| a != b)
        .count();
    assert!(
        (disagree as f64) < 0.05 * m.labels.len() as f64,
        "{disagree} disagreements"
    );
}

#[test]
fn mknn_with_more_labels_and_neighbors_is_no_worse() {
    let ds = make_synthetic(SyntheticKind::TwoArcs, 200, 0.05, 7).unwrap();
    let cfg = BenchConfig {
        algorithms: vec![Algorithm::Mknn],
        k_values: vec![1, 10],
        labels_per_class: LabelsPerClass::TiedToK,
        seeds: (0..10).collect(),
        base: MethodConfig::new(4.0 * mean_nn_distance(&ds), 0.99, 8),
        grid: None,
    };
    let out = run_bench(&ds, &cfg).unwrap();
    let mean = |k: usize| out.reports.iter().find(|r| r.k == k).unwrap().mean;
    assert!(mean(10) <= mean(1), "k=10 {} vs k=1 {}", mean(10), mean(1));
}

#[test]
fn online_copy_of_a_labeled_point_gets_its_label() {
    let ds = two_arcs_split(100, 3, 8);
    let model = fit_mknn(
        &ds,
        &GraphConfig::new(4.0 * mean_nn_distance(&ds)),
        &TrwConfig::with_alpha(0.99),
        3,
    )
    .unwrap();
    let session = mknn_core::OnlineSession::new(model);
    for j in ds.labeled_indices() {
        let r = session.classify_online(ds.row(j)).unwrap();
        assert_eq!(r.predicted_class, ds.label(j).unwrap());
    }
}

proptest! {
    #[test]
    fn vote_scores_sum_the_top_k(
        weights in prop::collection::vec(0.0f64..5.0, 1..30),
        k_frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let l = weights.len();
        let k = 1 + ((l - 1) as f64 * k_frac) as usize;
        let mut r = rng(seed);
        let labels: Vec<Label> = (0..l).map(|_| r.random_range(1..=3)).collect();
        let vote = weighted_vote(&weights, &labels, k, 3);
        let mut sorted = weights.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let top: f64 = sorted[..k].iter().sum();
        prop_assert!((vote.scores.iter().sum::<f64>() - top).abs() <= 1e-12 * (1.0 + top));
        prop_assert_eq!(vote.neighbors.len(), k);
        let best = vote.scores.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(vote.scores[vote.class as usize - 1], best);
    }
}
