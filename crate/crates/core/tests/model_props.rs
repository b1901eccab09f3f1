//! Property tests for the score kernel against its matrix form.

mod common;

use common::{rel_err, relation, rng, vector};
use ndarray::Array2;
use proptest::prelude::*;
use star_kge::model::{
    apply_translation_matrix, bilinear_form, complex_part, materialize_star_matrix, query_vector,
    score, score_gradients, translation_matrix, ModelKind, RelationParams,
};
use star_kge::patterns::{max_gradient_error, FD_STEP, FD_TOLERANCE};

fn dims() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(4), Just(8), Just(16)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernel_matches_materialized_matrix(n in dims(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (h, t) = (vector(&mut r, n), vector(&mut r, n));
        let rel = relation(&mut r, n);
        let m = materialize_star_matrix(rel.view());
        prop_assert_eq!(m.dim(), (n + 1, n + 1));
        let fast = score(&h, rel.view(), &t);
        let slow = bilinear_form(&h, &m.view(), &t);
        prop_assert!(rel_err(fast, slow) < 1e-10, "{} vs {}", fast, slow);
    }

    /// The score splits into the bilinear ComplEx part, a head-independent
    /// term `τ·t` and the constant 1.
    #[test]
    fn score_decomposes(n in dims(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (h, t) = (vector(&mut r, n), vector(&mut r, n));
        let rel = relation(&mut r, n);
        let e: f64 = rel.tau.iter().zip(&t).map(|(a, b)| a * b).sum();
        let parts = complex_part(&h, &rel.r_c, &t) + e + 1.0;
        prop_assert!(rel_err(score(&h, rel.view(), &t), parts) < 1e-12);
    }

    /// Conjugating the rotation swaps the roles of head and tail.
    #[test]
    fn conjugate_rotation_swaps_arguments(n in dims(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (h, t) = (vector(&mut r, n), vector(&mut r, n));
        let rel = relation(&mut r, n);
        let fwd = complex_part(&h, &rel.r_c, &t);
        let back = complex_part(&t, &rel.conjugate().r_c, &h);
        prop_assert!(rel_err(fwd, back) < 1e-12);
    }

    #[test]
    fn query_vector_matches_matrix_rows(n in dims(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = vector(&mut r, n);
        let rel = relation(&mut r, n);
        let m = materialize_star_matrix(rel.view());
        let q = query_vector(&h, rel.view());
        for j in 0..n {
            let col: f64 = (0..n).map(|i| h[i] * m[[i, j]]).sum::<f64>() + m[[n, j]];
            prop_assert!(rel_err(q[j], col) < 1e-12);
        }
    }

    #[test]
    fn translation_matrix_adds_offset(n in dims(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (x, tau) = (vector(&mut r, n), vector(&mut r, n));
        let moved = apply_translation_matrix(&x, &tau);
        for i in 0..n {
            prop_assert!((moved[i] - (x[i] + tau[i])).abs() < 1e-12);
        }
        let m: Array2<f64> = translation_matrix(&tau);
        prop_assert_eq!(m[[n, n]], 1.0);
    }

    #[test]
    fn score_gradients_match_finite_differences(n in prop_oneof![Just(2usize), Just(4), Just(8)], seed in any::<u64>()) {
        let mut r = rng(seed);
        let (h, t) = (vector(&mut r, n), vector(&mut r, n));
        let rel = relation(&mut r, n);
        let g = score_gradients(&h, rel.view(), &t);
        let err = [
            max_gradient_error(|x| score(x, rel.view(), &t), &h, &g.d_h, FD_STEP),
            max_gradient_error(|x| score(&h, rel.view(), x), &t, &g.d_t, FD_STEP),
            max_gradient_error(
                |x| score(&h, RelationParams::new(x.to_vec(), rel.tau.clone()).view(), &t),
                &rel.r_c,
                &g.d_r_c,
                FD_STEP,
            ),
            max_gradient_error(
                |x| score(&h, RelationParams::new(rel.r_c.clone(), x.to_vec()).view(), &t),
                &rel.tau,
                &g.d_tau,
                FD_STEP,
            ),
        ];
        prop_assert!(err.iter().all(|&e| e < FD_TOLERANCE), "{:?}", err);
    }
}

#[test]
fn kinds_constrain_parameters() {
    let mut r = rng(3);
    let table = common::random_table(&mut r, 5, 2, 6, ModelKind::DistMult, 1.0);
    for row in table.relation_complex().rows() {
        for k in 0..3 {
            assert_eq!(row[2 * k + 1], 0.0);
        }
    }
    assert!(table.relation_translation().iter().all(|&v| v == 0.0));
    let table = common::random_table(&mut r, 5, 2, 6, ModelKind::ComplEx, 1.0);
    assert!(table.relation_translation().iter().all(|&v| v == 0.0));
    let table = common::random_table(&mut r, 5, 2, 6, ModelKind::Star, 1.0);
    assert!(table.relation_translation().iter().any(|&v| v != 0.0));
}
