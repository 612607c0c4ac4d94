//! Exact Euclidean neighbor search. Ties are broken by the lower index.

use std::cmp::Ordering;

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Orders `(key, index)` pairs by key, then index.
pub(crate) fn by_key_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` smallest `(key, index)` pairs in ascending order.
pub(crate) fn smallest_k(mut items: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    let k = k.min(items.len());
    if k == 0 {
        return Vec::new();
    }
    if k < items.len() {
        items.select_nth_unstable_by(k - 1, by_key_then_index);
        items.truncate(k);
    }
    items.sort_unstable_by(by_key_then_index);
    items
}

/// The `k` nearest rows of `points` (row-major, width `dim`) to `query`
/// among `candidates`, as `(squared distance, index)` ascending.
pub(crate) fn nearest_among(
    points: &[f64],
    dim: usize,
    query: &[f64],
    candidates: impl Iterator<Item = usize>,
    k: usize,
) -> Vec<(f64, usize)> {
    let items = candidates
        .map(|j| (squared_distance(query, &points[j * dim..(j + 1) * dim]), j))
        .collect();
    smallest_k(items, k)
}
