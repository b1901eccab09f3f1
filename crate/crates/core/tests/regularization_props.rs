//! Property tests for the Frobenius and DURA penalties.

mod common;

use common::{rel_err, relation, rng, vector};
use ndarray::Array1;
use proptest::prelude::*;
use star_kge::model::{homogeneous, materialize_star_matrix, Relation, RelationParams, ScoreGradient};
use star_kge::patterns::{max_gradient_error, FD_STEP, FD_TOLERANCE};
use star_kge::regularization::{
    dura_gradient, dura_penalty, fro_gradient, fro_penalty, DuraVariant,
};

fn dims() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(4), Just(6), Just(8)]
}

fn variants() -> impl Strategy<Value = DuraVariant> {
    prop_oneof![Just(DuraVariant::Literal), Just(DuraVariant::Exact)]
}

/// Largest finite-difference error per argument of a penalty.
fn grad_errors(
    f: impl Fn(&[f64], Relation<'_>, &[f64]) -> f64,
    g: &ScoreGradient,
    h: &[f64],
    rel: &RelationParams,
    t: &[f64],
) -> [f64; 4] {
    [
        max_gradient_error(|x| f(x, rel.view(), t), h, &g.d_h, FD_STEP),
        max_gradient_error(|x| f(h, rel.view(), x), t, &g.d_t, FD_STEP),
        max_gradient_error(
            |x| f(h, RelationParams::new(x.to_vec(), rel.tau.clone()).view(), t),
            &rel.r_c,
            &g.d_r_c,
            FD_STEP,
        ),
        max_gradient_error(
            |x| f(h, RelationParams::new(rel.r_c.clone(), x.to_vec()).view(), t),
            &rel.tau,
            &g.d_tau,
            FD_STEP,
        ),
    ]
}

fn sq(v: &Array1<f64>) -> f64 {
    v.dot(v)
}

/// Swaps complex blocks `a` and `b` of a vector.
fn swap_blocks(v: &[f64], a: usize, b: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.swap(2 * a, 2 * b);
    out.swap(2 * a + 1, 2 * b + 1);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// In homogeneous coordinates the exact variant is
    /// `‖ĥ‖² + ‖t̂‖² + ‖ĥᵀR*‖² + ‖R* t̂‖²` minus the four constant ones.
    #[test]
    fn exact_dura_matches_homogeneous_norms(n in dims(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (h, t) = (vector(&mut r, n), vector(&mut r, n));
        let rel = relation(&mut r, n);
        let m = materialize_star_matrix(rel.view());
        let (hh, th) = (homogeneous(&h), homogeneous(&t));
        let oracle = sq(&hh) + sq(&th) + sq(&hh.dot(&m)) + sq(&m.dot(&th)) - 4.0;
        let got = dura_penalty(&h, rel.view(), &t, DuraVariant::Exact);
        prop_assert!(rel_err(got, oracle) < 1e-10, "{} vs {}", got, oracle);
    }

    #[test]
    fn variants_coincide_when_translation_vanishes(n in dims(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (h, t) = (vector(&mut r, n), vector(&mut r, n));
        let rel = relation(&mut r, n).without_translation();
        let a = dura_penalty(&h, rel.view(), &t, DuraVariant::Literal);
        let b = dura_penalty(&h, rel.view(), &t, DuraVariant::Exact);
        prop_assert!(rel_err(a, b) < 1e-12);
    }

    #[test]
    fn penalties_ignore_block_order(n in prop_oneof![Just(4usize), Just(6), Just(8)], seed in any::<u64>(), v in variants()) {
        let mut r = rng(seed);
        let (h, t) = (vector(&mut r, n), vector(&mut r, n));
        let rel = relation(&mut r, n);
        let (a, b) = (0, n / 2 - 1);
        let h2 = swap_blocks(&h, a, b);
        let t2 = swap_blocks(&t, a, b);
        let rel2 = RelationParams::new(swap_blocks(&rel.r_c, a, b), swap_blocks(&rel.tau, a, b));
        prop_assert!(rel_err(fro_penalty(&h, rel.view(), &t), fro_penalty(&h2, rel2.view(), &t2)) < 1e-12);
        prop_assert!(rel_err(dura_penalty(&h, rel.view(), &t, v), dura_penalty(&h2, rel2.view(), &t2, v)) < 1e-12);
    }

    #[test]
    fn penalties_are_nonnegative_for_fro(n in dims(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (h, t) = (vector(&mut r, n), vector(&mut r, n));
        let rel = relation(&mut r, n);
        prop_assert!(fro_penalty(&h, rel.view(), &t) >= 0.0);
    }

    #[test]
    fn gradients_match_finite_differences(n in dims(), seed in any::<u64>(), v in variants()) {
        let mut r = rng(seed);
        let (h, t) = (vector(&mut r, n), vector(&mut r, n));
        let rel = relation(&mut r, n);
        let errs = grad_errors(fro_penalty, &fro_gradient(&h, rel.view(), &t), &h, &rel, &t);
        prop_assert!(errs.iter().all(|&e| e < FD_TOLERANCE), "fro {:?}", errs);
        let dura = |h: &[f64], rel: Relation<'_>, t: &[f64]| dura_penalty(h, rel, t, v);
        let errs = grad_errors(dura, &dura_gradient(&h, rel.view(), &t, v), &h, &rel, &t);
        prop_assert!(errs.iter().all(|&e| e < FD_TOLERANCE), "dura {:?}", errs);
    }
}
