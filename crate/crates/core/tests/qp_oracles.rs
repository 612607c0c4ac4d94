mod common;

use common::*;
use mknn_core::{reconstruct_weights, solve_simplex_lsq};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (1usize..=5, 1usize..=4).prop_flat_map(|(d, k)| {
        (
            prop::collection::vec(-2.0f64..2.0, d),
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), k),
        )
    })
}

fn solve(target: &[f64], basis: &[Vec<f64>]) -> (Vec<f64>, f64, f64) {
    let refs: Vec<&[f64]> = basis.iter().map(Vec::as_slice).collect();
    let (z, report) = solve_simplex_lsq(target, &refs).unwrap();
    (z.into_vec(), report.objective, report.kkt_residual)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matches_exhaustive_oracle((x, basis) in instance()) {
        let (z, obj, kkt) = solve(&x, &basis);
        let (best, _) = exhaustive_simplex_lsq(&x, &basis);
        prop_assert!((obj - best).abs() <= 1e-8, "solver {obj} oracle {best}");
        prop_assert!((z.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(z.iter().all(|&v| v >= 0.0));
        prop_assert!(kkt <= 1e-8);
        prop_assert!((simplex_objective(&x, &basis, &z) - obj).abs() <= 1e-12 * (1.0 + obj));
    }

    #[test]
    fn no_feasible_descent((x, basis) in instance()) {
        let (z, obj, _) = solve(&x, &basis);
        let step = 1e-4;
        for i in 0..z.len() {
            for j in 0..z.len() {
                if i == j || z[j] < step {
                    continue;
                }
                let mut moved = z.clone();
                moved[i] += step;
                moved[j] -= step;
                prop_assert!(simplex_objective(&x, &basis, &moved) >= obj - 1e-9);
            }
        }
    }

    #[test]
    fn reconstruction_is_the_convex_combination(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..3.0, 6), 1..5),
        raw in prop::collection::vec(0.01f64..1.0, 4),
    ) {
        let k = rows.len();
        let total: f64 = raw[..k].iter().sum();
        let z: Vec<f64> = raw[..k].iter().map(|v| v / total).collect();
        let z = mknn_core::SimplexWeights::new(z).unwrap();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let got = reconstruct_weights(&refs, &z).unwrap();
        for c in 0..6 {
            let want: f64 = rows.iter().zip(z.as_slice()).map(|(r, zj)| zj * r[c]).sum();
            prop_assert!(got[c] >= 0.0);
            prop_assert!((got[c] - want).abs() <= 1e-15 * (1.0 + want));
        }
    }
}

#[test]
fn duplicate_columns_reach_the_optimum() {
    let x = [0.3, -0.2, 1.0];
    let b = vec![
        vec![1.0, 0.0, 1.0],
        vec![1.0, 0.0, 1.0],
        vec![-1.0, 0.5, 0.0],
    ];
    let (_, obj, _) = solve(&x, &b);
    assert!((obj - exhaustive_simplex_lsq(&x, &b).0).abs() <= 1e-10);
}

#[test]
fn single_neighbor_is_a_copy() {
    let (z, obj, _) = solve(&[1.0, 2.0], &[vec![0.0, 0.0]]);
    assert_eq!(z, vec![1.0]);
    assert_eq!(obj, 5.0);
}
