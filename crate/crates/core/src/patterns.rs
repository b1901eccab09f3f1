//! Executable checks of the relation-pattern algebra of STaR.
//!
//! The algebraic checks work on materialized `(n+1)×(n+1)` matrices, so they
//! validate the vectorized kernel independently. Checks that need a scoring
//! function take a [`ScoreKernel`]; the closure check cross-checks the kernel
//! against the matrix product, which is what exposes a faulty kernel.

use std::fmt;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    bilinear_form, check_dim, materialize_star_matrix, query_vector, score_gradients,
    RelationParams, ScoreKernel,
};

/// Absolute/relative tolerance for 64-bit matrix identities.
pub const TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    Symmetry,
    AntiSymmetry,
    Composition,
    Commutativity,
    NonCommutativity,
    Inversion,
    ComplexRelationsMargin,
    /// Head independence of the translation contribution.
    ModelE,
    OracleEquivalence,
    Gradient,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    /// The relation is outside the check's precondition.
    Inapplicable,
    /// Reported for reference; never a failure.
    Info,
}

/// Parameters at which a check was evaluated, with the residual found there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<RelationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
}

impl Witness {
    fn residual(residual: f64) -> Self {
        Witness {
            residual,
            relations: Vec::new(),
            h: None,
            t: None,
        }
    }

    fn with_relations(mut self, rels: &[&RelationParams]) -> Self {
        self.relations = rels.iter().map(|r| (*r).clone()).collect();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternCheckResult {
    pub pattern: Pattern,
    pub name: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub detail: String,
}

impl PatternCheckResult {
    fn new(pattern: Pattern, outcome: Outcome, witness: Option<Witness>, detail: String) -> Self {
        PatternCheckResult {
            pattern,
            name: pattern.to_string(),
            outcome,
            witness,
            detail,
        }
    }

    fn from_residual(pattern: Pattern, witness: Witness, detail: impl Into<String>) -> Self {
        let outcome = if witness.residual < TOLERANCE {
            Outcome::Pass
        } else {
            Outcome::Fail
        };
        PatternCheckResult::new(pattern, outcome, Some(witness), detail.into())
    }

    fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.outcome != Outcome::Fail
    }

    pub fn residual(&self) -> Option<f64> {
        self.witness.as_ref().map(|w| w.residual)
    }
}

/// `|a − b| / max(1, |a|, |b|)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d.is_nan() {
        return f64::INFINITY;
    }
    d / 1f64.max(a.abs()).max(b.abs())
}

fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Source of random vectors and relations for the checks.
pub struct Sampler {
    rng: ChaCha8Rng,
    n: usize,
}

impl Sampler {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        check_dim(n)?;
        Ok(Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn vector(&mut self) -> Vec<f64> {
        (0..self.n).map(|_| self.rng.random_range(-1.0..1.0)).collect()
    }

    pub fn relation(&mut self) -> RelationParams {
        RelationParams::new(self.vector(), self.vector())
    }

    pub fn complex_relation(&mut self) -> RelationParams {
        self.relation().without_translation()
    }

    /// `r2 = 0`, `τ = 0`: a diagonal `R_c`.
    pub fn diagonal_relation(&mut self) -> RelationParams {
        let mut rel = self.complex_relation();
        for k in 0..self.n / 2 {
            rel.r_c[2 * k + 1] = 0.0;
        }
        rel
    }

    /// Unit-norm blocks at angles bounded away from zero, `τ = 0`.
    pub fn rotation(&mut self) -> RelationParams {
        let mut r_c = vec![0.0; self.n];
        for k in 0..self.n / 2 {
            let sign = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let theta: f64 = sign * self.rng.random_range(0.3..2.8);
            r_c[2 * k] = theta.cos();
            r_c[2 * k + 1] = theta.sin();
        }
        RelationParams::new(r_c, vec![0.0; self.n])
    }

    /// Identity blocks with a nonzero offset.
    pub fn translation(&mut self) -> RelationParams {
        let mut rel = RelationParams::identity(self.n);
        rel.tau = (0..self.n)
            .map(|_| {
                let v: f64 = self.rng.random_range(0.5..1.5);
                if self.rng.random_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        rel
    }
}

/// Reads `(r_c, τ)` back out of a matrix of STaR form, or reports the largest
/// deviation from that form.
pub fn extract_relation(m: &Array2<f64>) -> std::result::Result<RelationParams, f64> {
    let n = m.nrows() - 1;
    let mut deviation: f64 = 0.0;
    for i in 0..n {
        deviation = deviation.max(m[[i, n]].abs());
    }
    deviation = deviation.max((m[[n, n]] - 1.0).abs());
    let mut r_c = vec![0.0; n];
    for k in 0..n / 2 {
        let (i, j) = (2 * k, 2 * k + 1);
        deviation = deviation
            .max((m[[i, i]] - m[[j, j]]).abs())
            .max((m[[j, i]] + m[[i, j]]).abs());
        r_c[i] = m[[i, i]];
        r_c[j] = m[[j, i]];
        for c in 0..n {
            if c != i && c != j {
                deviation = deviation.max(m[[i, c]].abs()).max(m[[j, c]].abs());
            }
        }
    }
    if deviation >= TOLERANCE {
        return Err(deviation);
    }
    let tau = (0..n).map(|c| m[[n, c]]).collect();
    Ok(RelationParams::new(r_c, tau))
}

/// Closure of STaR under composition: `R*¹·R*²` has STaR form with composed
/// offset `τ¹ᵀR_c² + τ²ᵀ`, and the kernel scores the composed relation like
/// the matrix product.
pub fn check_composition_closure<K: ScoreKernel>(
    kernel: &K,
    rel1: &RelationParams,
    rel2: &RelationParams,
    sampler: &mut Sampler,
    trials: usize,
) -> PatternCheckResult {
    let m1 = materialize_star_matrix(rel1.view());
    let m2 = materialize_star_matrix(rel2.view());
    let product = m1.dot(&m2);
    let composed = match extract_relation(&product) {
        Ok(rel) => rel,
        Err(dev) => {
            return PatternCheckResult::new(
                Pattern::Composition,
                Outcome::Fail,
                Some(Witness::residual(dev).with_relations(&[rel1, rel2])),
                "product is not of STaR form".into(),
            )
        }
    };
    // τ¹ᵀR_c² + τ²ᵀ is the query vector of τ¹ under the second relation.
    let expected_tau = query_vector(&rel1.tau, rel2.view());
    let mut worst: f64 = composed
        .tau
        .iter()
        .zip(&expected_tau)
        .map(|(a, b)| relative_gap(*a, *b))
        .fold(0.0, f64::max);
    let round_trip = frobenius_distance(&materialize_star_matrix(composed.view()), &product);
    worst = worst.max(round_trip);
    let mut witness = Witness::residual(worst).with_relations(&[rel1, rel2]);
    for _ in 0..trials {
        let (h, t) = (sampler.vector(), sampler.vector());
        let fast = kernel.score(&h, composed.view(), &t);
        let oracle = bilinear_form(&h, &product.view(), &t);
        let gap = relative_gap(fast, oracle);
        if gap > witness.residual || gap.is_nan() {
            witness.residual = gap;
            witness.h = Some(h);
            witness.t = Some(t);
        }
    }
    PatternCheckResult::from_residual(
        Pattern::Composition,
        witness,
        "product of two relation matrices is a relation matrix with offset τ¹ᵀR_c² + τ²ᵀ",
    )
}

/// Passes when the two products agree exactly when `expect_commute` says so.
pub fn check_commutativity(
    rel1: &RelationParams,
    rel2: &RelationParams,
    expect_commute: bool,
) -> PatternCheckResult {
    let m1 = materialize_star_matrix(rel1.view());
    let m2 = materialize_star_matrix(rel2.view());
    let gap = frobenius_distance(&m1.dot(&m2), &m2.dot(&m1));
    let commutes = gap < TOLERANCE;
    let (pattern, detail) = if expect_commute {
        (Pattern::Commutativity, "R*¹·R*² = R*²·R*¹")
    } else {
        (Pattern::NonCommutativity, "R*¹·R*² ≠ R*²·R*¹")
    };
    let outcome = if commutes == expect_commute {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    PatternCheckResult::new(
        pattern,
        outcome,
        Some(Witness::residual(gap).with_relations(&[rel1, rel2])),
        format!("{detail}; ‖R*¹R*² − R*²R*¹‖_F = {gap:.3e}"),
    )
}

/// A pure rotation and a pure translation that do not commute.
pub fn non_commutativity_witness(sampler: &mut Sampler) -> PatternCheckResult {
    let rotation = sampler.rotation();
    let translation = sampler.translation();
    check_commutativity(&rotation, &translation, false)
}

fn swap_gap(rel: &RelationParams, h: &[f64], t: &[f64]) -> f64 {
    let m = materialize_star_matrix(rel.view());
    relative_gap(bilinear_form(h, &m.view(), t), bilinear_form(t, &m.view(), h))
}

/// Random search for `s(h, r, t) ≠ s(t, r, h)`. Passes when none is found.
pub fn check_symmetry(rel: &RelationParams, sampler: &mut Sampler, trials: usize) -> PatternCheckResult {
    let mut witness = Witness::residual(0.0).with_relations(&[rel]);
    for _ in 0..trials {
        let (h, t) = (sampler.vector(), sampler.vector());
        let gap = swap_gap(rel, &h, &t);
        if gap > witness.residual {
            witness.residual = gap;
            witness.h = Some(h);
            witness.t = Some(t);
        }
    }
    PatternCheckResult::from_residual(Pattern::Symmetry, witness, "s(h, r, t) = s(t, r, h)")
}

/// Symmetry of the DistMult degeneration: zero off-diagonal block
/// components and `τ = 0`.
pub fn check_symmetry_mode(rel: &RelationParams, sampler: &mut Sampler, trials: usize) -> PatternCheckResult {
    let off_diagonal_zero = rel.r_c.iter().skip(1).step_by(2).all(|&v| v == 0.0);
    if !off_diagonal_zero || rel.tau.iter().any(|&v| v != 0.0) {
        return PatternCheckResult::new(
            Pattern::Symmetry,
            Outcome::Inapplicable,
            None,
            "requires r_c[2k+1] = 0 and τ = 0".into(),
        );
    }
    check_symmetry(rel, sampler, trials)
}

/// Inversion through conjugation: with `τ = 0` the conjugate relation is the
/// transpose, so `s(h, r, t) = s(t, r̄, h)`.
pub fn check_inversion(rel: &RelationParams, sampler: &mut Sampler, trials: usize) -> PatternCheckResult {
    if rel.tau.iter().any(|&v| v != 0.0) {
        return PatternCheckResult::new(
            Pattern::Inversion,
            Outcome::Inapplicable,
            None,
            "τ ≠ 0: the transpose is not of STaR form".into(),
        );
    }
    let inverse = rel.conjugate();
    let m1 = materialize_star_matrix(rel.view());
    let m2 = materialize_star_matrix(inverse.view());
    let mut witness =
        Witness::residual(frobenius_distance(&m1.t().to_owned(), &m2)).with_relations(&[rel, &inverse]);
    for _ in 0..trials {
        let (h, t) = (sampler.vector(), sampler.vector());
        let gap = relative_gap(
            bilinear_form(&h, &m1.view(), &t),
            bilinear_form(&t, &m2.view(), &h),
        );
        if gap > witness.residual {
            witness.residual = gap;
            witness.h = Some(h);
            witness.t = Some(t);
        }
    }
    PatternCheckResult::from_residual(Pattern::Inversion, witness, "R*² = (R*¹)ᵀ via conjugation")
}

/// `α·s(h, r, t) = s(h, αr, t) + (α − 1)` where `αr = (α r_c, α τ)`.
pub fn check_margin_scaling(
    rel: &RelationParams,
    alpha: f64,
    sampler: &mut Sampler,
    trials: usize,
) -> Result<PatternCheckResult> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::config("alpha", "must be finite and nonzero"));
    }
    let scaled = rel.scaled(alpha);
    let m = materialize_star_matrix(rel.view());
    let ms = materialize_star_matrix(scaled.view());
    let mut witness = Witness::residual(0.0).with_relations(&[rel, &scaled]);
    for _ in 0..trials {
        let (h, t) = (sampler.vector(), sampler.vector());
        let lhs = alpha * bilinear_form(&h, &m.view(), &t);
        let rhs = bilinear_form(&h, &ms.view(), &t) + (alpha - 1.0);
        let gap = relative_gap(lhs, rhs);
        if gap > witness.residual {
            witness.residual = gap;
            witness.h = Some(h);
            witness.t = Some(t);
        }
    }
    Ok(PatternCheckResult::from_residual(
        Pattern::ComplexRelationsMargin,
        witness,
        format!("α·s = s' + (α − 1) at α = {alpha}"),
    ))
}

/// `s(h, r, t) − s(h, r with τ = 0, t) = τ·t` for every head.
pub fn check_e_term(rel: &RelationParams, sampler: &mut Sampler, trials: usize) -> PatternCheckResult {
    let m = materialize_star_matrix(rel.view());
    let m0 = materialize_star_matrix(rel.without_translation().view());
    let mut witness = Witness::residual(0.0).with_relations(&[rel]);
    for _ in 0..trials {
        let t = sampler.vector();
        let expected: f64 = rel.tau.iter().zip(&t).map(|(a, b)| a * b).sum();
        for _ in 0..4 {
            let h = sampler.vector();
            let diff = bilinear_form(&h, &m.view(), &t) - bilinear_form(&h, &m0.view(), &t);
            let gap = relative_gap(diff, expected);
            if gap > witness.residual {
                witness.residual = gap;
                witness.h = Some(h);
                witness.t = Some(t.clone());
            }
        }
    }
    PatternCheckResult::from_residual(Pattern::ModelE, witness, "translation adds τ·t regardless of h")
}

/// With `r_c = 0` the score ignores the head, so
/// `s(h, r, t) − s(t, r, h) = τ·t − τ·h`. Reported as information: the
/// identity is asserted, anti-symmetry itself is not.
pub fn check_anti_symmetry_translation(
    tau: &[f64],
    sampler: &mut Sampler,
    trials: usize,
) -> PatternCheckResult {
    let rel = RelationParams::new(vec![0.0; tau.len()], tau.to_vec());
    let m = materialize_star_matrix(rel.view());
    let mut witness = Witness::residual(0.0).with_relations(&[&rel]);
    for _ in 0..trials {
        let (h, t) = (sampler.vector(), sampler.vector());
        let lhs = bilinear_form(&h, &m.view(), &t) - bilinear_form(&t, &m.view(), &h);
        let rhs: f64 = tau.iter().zip(t.iter().zip(&h)).map(|(a, (x, y))| a * (x - y)).sum();
        let gap = relative_gap(lhs, rhs);
        if gap > witness.residual {
            witness.residual = gap;
            witness.h = Some(h);
            witness.t = Some(t);
        }
    }
    let mut result = PatternCheckResult::from_residual(
        Pattern::AntiSymmetry,
        witness,
        "r_c = 0: s(h,r,t) − s(t,r,h) = τ·(t − h); asymmetric unless τ·t = τ·h",
    );
    if result.outcome == Outcome::Pass {
        result.outcome = Outcome::Info;
    }
    result
}

/// Kernel against the materialized product.
pub fn check_oracle_equivalence<K: ScoreKernel>(
    kernel: &K,
    sampler: &mut Sampler,
    trials: usize,
) -> PatternCheckResult {
    let mut witness = Witness::residual(0.0);
    for _ in 0..trials {
        let rel = sampler.relation();
        let (h, t) = (sampler.vector(), sampler.vector());
        let m = materialize_star_matrix(rel.view());
        let gap = relative_gap(kernel.score(&h, rel.view(), &t), bilinear_form(&h, &m.view(), &t));
        if gap > witness.residual || gap.is_nan() {
            witness = Witness {
                residual: gap,
                relations: vec![rel],
                h: Some(h),
                t: Some(t),
            };
        }
    }
    PatternCheckResult::from_residual(
        Pattern::OracleEquivalence,
        witness,
        "vectorized score equals ĥᵀR*t̂",
    )
}

/// Central finite difference of `f` at `x`, coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, step: f64) -> f64 {
    let mut p = x.to_vec();
    p[i] = x[i] + step;
    let up = f(&p);
    p[i] = x[i] - step;
    let down = f(&p);
    (up - down) / (2.0 * step)
}

/// Gradient-check error `|a − n| / max(1, |a|, |n|)`, bounded by absolute
/// error for tiny derivatives.
pub fn gradient_error(analytic: f64, numeric: f64) -> f64 {
    relative_gap(analytic, numeric)
}

/// Largest [`gradient_error`] between `grad` and central differences of `f`.
pub fn max_gradient_error(f: impl Fn(&[f64]) -> f64, x: &[f64], grad: &[f64], step: f64) -> f64 {
    (0..x.len())
        .map(|i| gradient_error(grad[i], central_difference(&f, x, i, step)))
        .fold(0.0, f64::max)
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Analytic score gradients against central differences of the kernel.
pub fn check_score_gradients<K: ScoreKernel>(
    kernel: &K,
    sampler: &mut Sampler,
    trials: usize,
) -> PatternCheckResult {
    let mut worst = Witness::residual(0.0);
    for _ in 0..trials {
        let rel = sampler.relation();
        let (h, t) = (sampler.vector(), sampler.vector());
        let g = score_gradients(&h, rel.view(), &t);
        let errors = [
            max_gradient_error(|x| kernel.score(x, rel.view(), &t), &h, &g.d_h, FD_STEP),
            max_gradient_error(|x| kernel.score(&h, rel.view(), x), &t, &g.d_t, FD_STEP),
            max_gradient_error(
                |x| kernel.score(&h, RelationParams::new(x.to_vec(), rel.tau.clone()).view(), &t),
                &rel.r_c,
                &g.d_r_c,
                FD_STEP,
            ),
            max_gradient_error(
                |x| kernel.score(&h, RelationParams::new(rel.r_c.clone(), x.to_vec()).view(), &t),
                &rel.tau,
                &g.d_tau,
                FD_STEP,
            ),
        ];
        let err = errors.into_iter().fold(0.0, f64::max);
        if err > worst.residual || err.is_nan() {
            worst = Witness {
                residual: err,
                relations: vec![rel],
                h: Some(h),
                t: Some(t),
            };
        }
    }
    let outcome = if worst.residual < FD_TOLERANCE {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    PatternCheckResult::new(
        Pattern::Gradient,
        outcome,
        Some(worst),
        format!("analytic vs central differences (step {FD_STEP:e}), relative error < {FD_TOLERANCE:e}"),
    )
}

/// Folds repeated runs of one check into a single result: the first failure
/// if any, otherwise the run with the largest residual.
fn fold_runs(name: &str, runs: impl IntoIterator<Item = PatternCheckResult>) -> PatternCheckResult {
    let mut best: Option<PatternCheckResult> = None;
    let mut count = 0;
    for run in runs {
        count += 1;
        if run.outcome == Outcome::Fail {
            return run.named(name);
        }
        let replace = match &best {
            None => true,
            Some(b) => run.residual().unwrap_or(0.0) > b.residual().unwrap_or(0.0),
        };
        if replace {
            best = Some(run);
        }
    }
    let mut out = best.expect("at least one run").named(name);
    out.detail = format!("{} ({count} runs)", out.detail);
    out
}

/// A check that is expected to report `expected`; any other outcome fails.
fn expect_outcome(name: &str, mut result: PatternCheckResult, expected: Outcome) -> PatternCheckResult {
    let actual = result.outcome;
    result.outcome = if actual == expected {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    result.detail = format!("{} [expected {expected:?}, got {actual:?}]", result.detail);
    result.named(name)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub n: usize,
    pub seed: u64,
    pub trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n: 8,
            seed: 0,
            trials: 100,
        }
    }
}

/// Runs every pattern check, plus oracle and gradient checks, for `kernel`.
pub fn verify_suite<K: ScoreKernel>(kernel: &K, config: &VerifyConfig) -> Result<Vec<PatternCheckResult>> {
    let VerifyConfig { n, seed, trials } = *config;
    let mut s = Sampler::new(n, seed)?;
    let trials = trials.max(1);
    // Inner sample count for checks that average over (h, t) pairs.
    let pairs = 10;
    let mut out = Vec::new();

    let id = RelationParams::identity(n);
    out.push(check_composition_closure(kernel, &id, &id, &mut s, pairs).named("composition: identity ∘ identity"));
    let runs: Vec<_> = (0..trials)
        .map(|_| {
            let (a, b) = (s.relation(), s.relation());
            check_composition_closure(kernel, &a, &b, &mut s, pairs)
        })
        .collect();
    out.push(fold_runs("composition: random pairs", runs));

    let runs: Vec<_> = (0..trials)
        .map(|_| check_commutativity(&s.complex_relation(), &s.complex_relation(), true))
        .collect();
    out.push(fold_runs("commutativity: τ¹ = τ² = 0", runs));
    let runs: Vec<_> = (0..trials)
        .map(|_| {
            let r = s.relation();
            check_commutativity(&r, &r, true)
        })
        .collect();
    out.push(fold_runs("commutativity: r ∘ r", runs));
    let runs: Vec<_> = (0..trials)
        .map(|_| check_commutativity(&s.relation(), &s.relation(), false))
        .collect();
    out.push(fold_runs("commutativity: fails with τ ≠ 0", runs));
    let runs: Vec<_> = (0..trials).map(|_| non_commutativity_witness(&mut s)).collect();
    out.push(fold_runs("non-commutativity: rotation vs translation", runs));

    out.push(check_symmetry_mode(&id, &mut s, trials).named("symmetry: identity"));
    let runs: Vec<_> = (0..trials)
        .map(|_| {
            let r = s.diagonal_relation();
            check_symmetry_mode(&r, &mut s, pairs)
        })
        .collect();
    out.push(fold_runs("symmetry: diagonal R_c, τ = 0", runs));
    let generic = s.complex_relation();
    out.push(expect_outcome(
        "symmetry: counterexample for r2 ≠ 0",
        check_symmetry(&generic, &mut s, trials),
        Outcome::Fail,
    ));
    out.push(expect_outcome(
        "symmetry: generic relation is inapplicable",
        check_symmetry_mode(&s.relation(), &mut s, trials),
        Outcome::Inapplicable,
    ));

    out.push(check_inversion(&id, &mut s, pairs).named("inversion: identity"));
    let runs: Vec<_> = (0..trials)
        .map(|_| {
            let r = s.complex_relation();
            check_inversion(&r, &mut s, pairs)
        })
        .collect();
    out.push(fold_runs("inversion: conjugate blocks", runs));
    out.push(expect_outcome(
        "inversion: τ ≠ 0 is inapplicable",
        check_inversion(&s.translation(), &mut s, pairs),
        Outcome::Inapplicable,
    ));

    for alpha in [1.0, 2.0, -1.0, 0.37] {
        let runs = (0..trials)
            .map(|_| {
                let r = s.relation();
                check_margin_scaling(&r, alpha, &mut s, pairs)
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(fold_runs(&format!("margin scaling: α = {alpha}"), runs));
    }

    let runs: Vec<_> = (0..trials)
        .map(|_| {
            let r = s.relation();
            check_e_term(&r, &mut s, pairs)
        })
        .collect();
    out.push(fold_runs("model E term: head independence", runs));
    let tau = s.vector();
    out.push(check_anti_symmetry_translation(&tau, &mut s, trials).named("anti-symmetry: r_c = 0 (informational)"));

    out.push(check_oracle_equivalence(kernel, &mut s, trials * pairs).named("kernel: oracle equivalence"));
    out.push(check_score_gradients(kernel, &mut s, trials).named("kernel: score gradients"));
    Ok(out)
}
