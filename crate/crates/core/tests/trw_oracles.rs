mod common;

use common::*;
use mknn_core::graph::GraphConfig;
use mknn_core::trw::{
    min_eigenvalue, r_matrix, resolvent_residual, transition_from_weights, trw_direct, trw_spd,
};
use mknn_core::{ConstrainedGraph, TrwConfig, TrwModel, TrwRoute};
use proptest::prelude::*;

#[test]
fn direct_route_matches_truncated_series() {
    let mut r = rng(11);
    for &alpha in &[0.3, 0.5, 0.9] {
        for _ in 0..4 {
            let w = random_graph(30, &mut r);
            let p = row_normalize(&w);
            let got = trw_direct(&to_mat(&p), alpha).unwrap();
            assert!(max_abs_diff(&to_dense(&got), &resolvent_series(&p, alpha)) <= 1e-8);
        }
    }
}

#[test]
fn spd_route_matches_gauss_jordan() {
    let mut r = rng(12);
    let w = random_graph(25, &mut r);
    let (_, d) = transition_from_weights(&to_mat(&w)).unwrap();
    let got = trw_spd(&to_mat(&w), &d, 0.7).unwrap();
    assert!(max_abs_diff(&to_dense(&got), &resolvent(&row_normalize(&w), 0.7)) <= 1e-10);
}

#[test]
fn two_node_closed_form_both_routes() {
    let w = vec![vec![0.0, 0.4], vec![0.4, 0.0]];
    let graph = ConstrainedGraph::from_weights(to_mat(&w), GraphConfig::new(1.0)).unwrap();
    let want = [[4.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 4.0 / 3.0]];
    for route in [TrwRoute::Direct, TrwRoute::SpdFast] {
        let cfg = TrwConfig {
            route,
            ..TrwConfig::with_alpha(0.5)
        };
        let m = TrwModel::fit(&graph, &cfg).unwrap();
        for (i, row) in want.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                assert!((m.ptrw()[(i, j)] - w).abs() < 1e-15);
            }
        }
    }
}

fn graph_strategy() -> impl Strategy<Value = (Dense, f64)> {
    (5usize..40, any::<u64>(), 0.05f64..0.98)
        .prop_map(|(n, seed, alpha)| (random_graph(n, &mut rng(seed)), alpha))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn routes_agree((w, alpha) in graph_strategy()) {
        let wm = to_mat(&w);
        let (p, d) = transition_from_weights(&wm).unwrap();
        let direct = trw_direct(&p, alpha).unwrap();
        let spd = trw_spd(&wm, &d, alpha).unwrap();
        prop_assert!(max_abs_diff_mat(&direct, &spd) <= 1e-9);
    }

    #[test]
    fn resolvent_identity_and_diagonal((w, alpha) in graph_strategy()) {
        let wm = to_mat(&w);
        let (p, d) = transition_from_weights(&wm).unwrap();
        let x = trw_spd(&wm, &d, alpha).unwrap();
        prop_assert!(resolvent_residual(&p, alpha, &x) <= 1e-12);
        for i in 0..x.nrows() {
            prop_assert!(x[(i, i)] >= 1.0);
            for j in 0..x.ncols() {
                prop_assert!(x[(i, j)] >= -1e-15);
            }
        }
    }

    #[test]
    fn r_matrix_is_positive_definite((w, alpha) in graph_strategy()) {
        let wm = to_mat(&w);
        let (_, d) = transition_from_weights(&wm).unwrap();
        let r = r_matrix(&wm, &d, alpha).unwrap();
        prop_assert!(min_eigenvalue(&r).unwrap() > 0.0);
    }

    #[test]
    fn sym_weights_are_symmetric((w, alpha) in graph_strategy()) {
        let graph = ConstrainedGraph::from_weights(to_mat(&w), GraphConfig::new(1.0)).unwrap();
        let m = TrwModel::fit(&graph, &TrwConfig::with_alpha(alpha)).unwrap();
        let s = m.sym_weights();
        for i in 0..s.nrows() {
            for j in 0..s.ncols() {
                prop_assert_eq!(s[(i, j)].to_bits(), s[(j, i)].to_bits());
            }
        }
    }
}
