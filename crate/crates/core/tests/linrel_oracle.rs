//! LinRel against a dense textbook evaluation with an explicit inverse.

#[path = "support/oracles.rs"]
mod oracles;

use nalgebra::{DMatrix, DVector};
use proactive_core::intent::{LinRel, RelevanceState, TermDocMatrix, WidthNorm};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn factored_solve_matches_explicit_inverse() {
    let worst = oracles::linrel_equivalence(200, 99).unwrap();
    assert!(worst <= 1e-9);
}

#[test]
fn euclidean_width_is_unsquared_row_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let (words, rows, y) = oracles::random_linrel_instance(&mut rng, 50, 20);
        let x = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
        let want = oracles::linrel_reference(&x, &DVector::from_vec(y.clone()), 1.0).sigma.map(f64::sqrt);
        let lr = LinRel::with_norm(TermDocMatrix::from_dense(words, rows).unwrap(), 1.0, WidthNorm::Euclidean).unwrap();
        assert!(oracles::rel_dev(&lr.solve(&y).unwrap().sigma, &want) <= 1e-9);
    }
}

#[test]
fn identity_matrix_is_exact() {
    oracles::linrel_identity_exact(12).unwrap();
}

fn matrix_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (1usize..12, 1usize..8).prop_flat_map(|(v, m)| {
        (
            prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), 0.5f64..10.0], m), v),
            prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), Just(0.5)], v),
            prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), Just(0.25)], v),
        )
    })
}

fn build(rows: Vec<Vec<f64>>) -> LinRel {
    let words = (0..rows.len()).map(|i| format!("w{i:02}")).collect();
    LinRel::new(TermDocMatrix::from_dense(words, rows).unwrap(), 1.0).unwrap()
}

proptest! {
    #[test]
    fn sigma_does_not_depend_on_y((rows, y1, y2) in matrix_strategy()) {
        let lr = build(rows);
        let a = lr.solve(&y1).unwrap();
        let b = lr.solve(&y2).unwrap();
        prop_assert_eq!(a.sigma, b.sigma);
    }

    #[test]
    fn scaling_y_keeps_exploitation_order((rows, y, _) in matrix_strategy(), lambda in 0.1f64..10.0) {
        let lr = build(rows);
        let a = lr.solve(&y).unwrap().ucb(0.0);
        let scaled: Vec<f64> = y.iter().map(|v| v * lambda).collect();
        let b = lr.solve(&scaled).unwrap().ucb(0.0);
        for i in 0..a.len() {
            for j in 0..a.len() {
                if a[i] - a[j] > 1e-9 * (a[i].abs() + a[j].abs()) {
                    prop_assert!(b[i] >= b[j]);
                }
            }
        }
    }

    #[test]
    fn relevance_entries_are_reciprocal_counts(windows in prop::collection::vec(prop::collection::vec(0usize..6, 0..4), 1..30)) {
        let words: Vec<String> = (0..6).map(|i| format!("w{i}")).collect();
        let x = TermDocMatrix::from_dense(words.clone(), vec![vec![1.0]; 6]).unwrap();
        let mut st = RelevanceState::new(6, 0.1);
        for w in &windows {
            let win: Vec<&str> = w.iter().map(|&i| words[i].as_str()).collect();
            st.update(&x, &win);
            for (i, &yi) in st.y().iter().enumerate() {
                if win.contains(&words[i].as_str()) {
                    prop_assert_eq!(yi, 1.0);
                } else if yi != 0.0 {
                    prop_assert_eq!(yi, 1.0 / f64::from(st.windows_since(i)));
                    prop_assert!(yi >= 0.1);
                }
            }
        }
    }
}
