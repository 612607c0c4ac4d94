use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{argmax_class, check_k, Predictions};
use crate::data::{Dataset, Label};
use crate::error::{MknnError, Result};
use crate::neighbors::{nearest_among, smallest_k};

/// Added to distances before inverting them in wkNN.
pub const INVERSE_DISTANCE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Weighting {
    Uniform,
    InverseDistance,
}

/// Euclidean kNN majority vote for every unlabeled sample.
pub fn knn_baseline(ds: &Dataset, k: usize) -> Result<Predictions> {
    knn_predict(ds, k, &ds.unlabeled_indices(), Weighting::Uniform)
}

/// Euclidean kNN with votes weighted by `1 / (distance + 1e-12)`.
pub fn wknn_baseline(ds: &Dataset, k: usize) -> Result<Predictions> {
    knn_predict(ds, k, &ds.unlabeled_indices(), Weighting::InverseDistance)
}

/// kNN over shortest-path distances in the symmetric `geo_neighbors`-NN
/// graph. Labeled samples in other components are ignored; a query that
/// reaches none falls back to Euclidean kNN.
pub fn gknn_baseline(ds: &Dataset, k: usize, geo_neighbors: usize) -> Result<Predictions> {
    gknn_predict(ds, k, geo_neighbors, &ds.unlabeled_indices())
}

pub(crate) fn knn_predict(
    ds: &Dataset,
    k: usize,
    queries: &[usize],
    weighting: Weighting,
) -> Result<Predictions> {
    let labeled = ds.labeled_indices();
    check_k(k, labeled.len())?;
    let labels = queries
        .iter()
        .map(|&q| {
            let near = nearest_among(
                ds.samples(),
                ds.dim(),
                ds.row(q),
                labeled.iter().copied(),
                k,
            );
            let near: Vec<(f64, usize)> = near.into_iter().map(|(d2, j)| (d2.sqrt(), j)).collect();
            vote(ds, &near, weighting)
        })
        .collect();
    Ok(Predictions {
        indices: queries.to_vec(),
        labels,
    })
}

/// `near` holds `(distance, sample index)` pairs.
fn vote(ds: &Dataset, near: &[(f64, usize)], weighting: Weighting) -> Label {
    let mut scores = vec![0.0; ds.n_classes()];
    for &(d, j) in near {
        let w = match weighting {
            Weighting::Uniform => 1.0,
            Weighting::InverseDistance => 1.0 / (d + INVERSE_DISTANCE_EPS),
        };
        scores[ds.label(j).expect("labeled") as usize - 1] += w;
    }
    argmax_class(&scores)
}

pub(crate) fn gknn_predict(
    ds: &Dataset,
    k: usize,
    geo_neighbors: usize,
    queries: &[usize],
) -> Result<Predictions> {
    let labeled = ds.labeled_indices();
    check_k(k, labeled.len())?;
    let dist = geodesic_distances(ds, geo_neighbors, &labeled)?;
    let labels = queries
        .iter()
        .map(|&q| {
            let reachable: Vec<(f64, usize)> = labeled
                .iter()
                .enumerate()
                .filter(|(s, _)| dist[*s][q].is_finite())
                .map(|(s, &j)| (dist[s][q], j))
                .collect();
            if reachable.is_empty() {
                let near = nearest_among(
                    ds.samples(),
                    ds.dim(),
                    ds.row(q),
                    labeled.iter().copied(),
                    k,
                );
                vote(ds, &near, Weighting::Uniform)
            } else {
                vote(ds, &smallest_k(reachable, k), Weighting::Uniform)
            }
        })
        .collect();
    Ok(Predictions {
        indices: queries.to_vec(),
        labels,
    })
}

/// Shortest-path distances from each source to every sample over the
/// symmetrized `geo_neighbors`-NN graph with Euclidean edge lengths.
/// Unreachable samples get `f64::INFINITY`.
pub fn geodesic_distances(
    ds: &Dataset,
    geo_neighbors: usize,
    sources: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if geo_neighbors == 0 {
        return Err(MknnError::param("geo_neighbors", "must be positive"));
    }
    let n = ds.n();
    if let Some(&s) = sources.iter().find(|&&s| s >= n) {
        return Err(MknnError::IndexOutOfRange { index: s, len: n });
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        let near = nearest_among(
            ds.samples(),
            ds.dim(),
            ds.row(i),
            (0..n).filter(|&j| j != i),
            geo_neighbors,
        );
        for (d2, j) in near {
            let d = d2.sqrt();
            adj[i].push((j, d));
            adj[j].push((i, d));
        }
    }
    for list in &mut adj {
        list.sort_by_key(|e| e.0);
        list.dedup_by_key(|e| e.0);
    }
    Ok(sources.iter().map(|&s| dijkstra(&adj, s)).collect())
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    // reversed for a min-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, len) in &adj[u] {
            let nd = d + len;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist
}
