//! The STaR bilinear model.
//!
//! A relation is a ComplEx-style block matrix `R_c` (2×2 blocks
//! `[[r1, -r2], [r2, r1]]` on the diagonal) augmented with a translation row
//! `τ` in homogeneous coordinates:
//!
//! ```text
//!        ┌         ┐
//!   R* = │ R_c   0 │      s(h, r, t) = [h; 1]ᵀ R* [t; 1]
//!        │ τᵀ    1 │                 = hᵀ R_c t + τ·t + 1
//!        └         ┘
//! ```
//!
//! Block coordinates are interleaved: block `k` owns coordinates `2k` and
//! `2k + 1`. The homogeneous coordinate is implicit and always last.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Unconstrained blocks plus translation.
    #[serde(rename = "star")]
    Star,
    /// Unit-norm blocks (rotation only) plus translation.
    #[serde(rename = "tar")]
    Tar,
    /// Translation fixed at zero.
    #[serde(rename = "complex")]
    ComplEx,
    /// Translation and off-diagonal block entries fixed at zero.
    #[serde(rename = "distmult")]
    DistMult,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Star,
        ModelKind::Tar,
        ModelKind::ComplEx,
        ModelKind::DistMult,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Star => "star",
            ModelKind::Tar => "tar",
            ModelKind::ComplEx => "complex",
            ModelKind::DistMult => "distmult",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            ModelKind::Star => 0,
            ModelKind::Tar => 1,
            ModelKind::ComplEx => 2,
            ModelKind::DistMult => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn has_translation(self) -> bool {
        matches!(self, ModelKind::Star | ModelKind::Tar)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "star" => Ok(ModelKind::Star),
            "tar" => Ok(ModelKind::Tar),
            "complex" => Ok(ModelKind::ComplEx),
            "distmult" => Ok(ModelKind::DistMult),
            _ => Err(Error::config(
                "model_kind",
                format!("unknown model kind '{s}' (expected star, tar, complex or distmult)"),
            )),
        }
    }
}

pub fn check_dim(n: usize) -> Result<()> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::OddDimension(n));
    }
    Ok(())
}

/// Borrowed relation parameters.
#[derive(Clone, Copy, Debug)]
pub struct Relation<'a> {
    pub r_c: &'a [f64],
    pub tau: &'a [f64],
}

impl Relation<'_> {
    pub fn dim(&self) -> usize {
        self.r_c.len()
    }

    pub fn to_owned(&self) -> RelationParams {
        RelationParams {
            r_c: self.r_c.to_vec(),
            tau: self.tau.to_vec(),
        }
    }
}

/// Owned relation parameters: the block vector `r_c` and the offset `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationParams {
    pub r_c: Vec<f64>,
    pub tau: Vec<f64>,
}

impl RelationParams {
    pub fn new(r_c: Vec<f64>, tau: Vec<f64>) -> Self {
        assert_eq!(r_c.len(), tau.len(), "r_c and tau must have equal length");
        RelationParams { r_c, tau }
    }

    /// Every block `(1, 0)` and `τ = 0`: the identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut r_c = vec![0.0; n];
        for k in 0..n / 2 {
            r_c[2 * k] = 1.0;
        }
        RelationParams {
            r_c,
            tau: vec![0.0; n],
        }
    }

    pub fn view(&self) -> Relation<'_> {
        Relation {
            r_c: &self.r_c,
            tau: &self.tau,
        }
    }

    pub fn dim(&self) -> usize {
        self.r_c.len()
    }

    /// Negates every off-diagonal block component (complex conjugation).
    pub fn conjugate(&self) -> Self {
        let mut r_c = self.r_c.clone();
        for k in 0..r_c.len() / 2 {
            r_c[2 * k + 1] = -r_c[2 * k + 1];
        }
        RelationParams {
            r_c,
            tau: self.tau.clone(),
        }
    }

    pub fn without_translation(&self) -> Self {
        RelationParams {
            r_c: self.r_c.clone(),
            tau: vec![0.0; self.tau.len()],
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        RelationParams {
            r_c: self.r_c.iter().map(|x| alpha * x).collect(),
            tau: self.tau.iter().map(|x| alpha * x).collect(),
        }
    }
}

/// Anything that can score a single triple. The pattern checks are generic
/// over this so that a kernel can be validated against the matrix oracle.
pub trait ScoreKernel: Sync {
    fn score(&self, h: &[f64], rel: Relation<'_>, t: &[f64]) -> f64;
}

/// The production kernel, [`score`].
#[derive(Clone, Copy, Debug, Default)]
pub struct StarKernel;

impl ScoreKernel for StarKernel {
    fn score(&self, h: &[f64], rel: Relation<'_>, t: &[f64]) -> f64 {
        score(h, rel, t)
    }
}

fn check_shapes(h: &[f64], rel: Relation<'_>, t: &[f64]) {
    let n = h.len();
    assert!(n.is_multiple_of(2), "embedding dimension must be even, got {n}");
    assert!(
        t.len() == n && rel.r_c.len() == n && rel.tau.len() == n,
        "dimension mismatch: h={}, t={}, r_c={}, tau={}",
        n,
        t.len(),
        rel.r_c.len(),
        rel.tau.len()
    );
}

/// `hᵀ R_c t + τ·t + 1`, computed block by block.
pub fn score(h: &[f64], rel: Relation<'_>, t: &[f64]) -> f64 {
    check_shapes(h, rel, t);
    let mut acc = 0.0;
    for k in 0..h.len() / 2 {
        let (i, j) = (2 * k, 2 * k + 1);
        let (r1, r2) = (rel.r_c[i], rel.r_c[j]);
        acc += r1 * (h[i] * t[i] + h[j] * t[j]) + r2 * (h[j] * t[i] - h[i] * t[j]);
        acc += rel.tau[i] * t[i] + rel.tau[j] * t[j];
    }
    acc + 1.0
}

/// The ComplEx part `hᵀ R_c t` alone.
pub fn complex_part(h: &[f64], r_c: &[f64], t: &[f64]) -> f64 {
    let zeros = vec![0.0; r_c.len()];
    score(h, Relation { r_c, tau: &zeros }, t) - 1.0
}

/// The row vector `hᵀ R_c + τᵀ`; the score against `t` is `q·t + 1`.
pub fn query_vector(h: &[f64], rel: Relation<'_>) -> Vec<f64> {
    let mut q = vec![0.0; h.len()];
    query_vector_into(h, rel, &mut q);
    q
}

pub(crate) fn query_vector_into(h: &[f64], rel: Relation<'_>, q: &mut [f64]) {
    for k in 0..h.len() / 2 {
        let (i, j) = (2 * k, 2 * k + 1);
        let (r1, r2) = (rel.r_c[i], rel.r_c[j]);
        q[i] = r1 * h[i] + r2 * h[j] + rel.tau[i];
        q[j] = r1 * h[j] - r2 * h[i] + rel.tau[j];
    }
}

/// Pulls a gradient with respect to the query vector back onto `h`, `r_c`
/// and `τ`, accumulating into the given buffers.
pub(crate) fn backprop_query(
    d_q: &[f64],
    h: &[f64],
    rel: Relation<'_>,
    d_h: &mut [f64],
    d_r_c: &mut [f64],
    d_tau: &mut [f64],
) {
    for k in 0..h.len() / 2 {
        let (i, j) = (2 * k, 2 * k + 1);
        let (r1, r2) = (rel.r_c[i], rel.r_c[j]);
        let (g1, g2) = (d_q[i], d_q[j]);
        d_h[i] += g1 * r1 - g2 * r2;
        d_h[j] += g1 * r2 + g2 * r1;
        d_r_c[i] += g1 * h[i] + g2 * h[j];
        d_r_c[j] += g1 * h[j] - g2 * h[i];
        d_tau[i] += g1;
        d_tau[j] += g2;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreGradient {
    pub d_h: Vec<f64>,
    pub d_t: Vec<f64>,
    pub d_r_c: Vec<f64>,
    pub d_tau: Vec<f64>,
}

/// Exact partial derivatives of [`score`].
pub fn score_gradients(h: &[f64], rel: Relation<'_>, t: &[f64]) -> ScoreGradient {
    check_shapes(h, rel, t);
    let n = h.len();
    let mut g = ScoreGradient {
        d_h: vec![0.0; n],
        d_t: query_vector(h, rel),
        d_r_c: vec![0.0; n],
        d_tau: vec![0.0; n],
    };
    backprop_query(t, h, rel, &mut g.d_h, &mut g.d_r_c, &mut g.d_tau);
    g
}

/// The explicit `(n+1)×(n+1)` matrix `[[R_c, 0], [τᵀ, 1]]`.
pub fn materialize_star_matrix(rel: Relation<'_>) -> Array2<f64> {
    let n = rel.dim();
    assert!(n.is_multiple_of(2) && rel.tau.len() == n, "bad relation shape");
    let mut m = Array2::zeros((n + 1, n + 1));
    for k in 0..n / 2 {
        let (i, j) = (2 * k, 2 * k + 1);
        let (r1, r2) = (rel.r_c[i], rel.r_c[j]);
        m[[i, i]] = r1;
        m[[i, j]] = -r2;
        m[[j, i]] = r2;
        m[[j, j]] = r1;
    }
    for (c, &tau) in rel.tau.iter().enumerate() {
        m[[n, c]] = tau;
    }
    m[[n, n]] = 1.0;
    m
}

/// `[x; 1]`.
pub fn homogeneous(x: &[f64]) -> Array1<f64> {
    let mut v = Array1::ones(x.len() + 1);
    v.slice_mut(s![..x.len()]).assign(&ArrayView1::from(x));
    v
}

/// `x̂ᵀ M ŷ` for a materialized relation matrix.
pub fn bilinear_form(x: &[f64], m: &ArrayView2<'_, f64>, y: &[f64]) -> f64 {
    homogeneous(x).dot(m).dot(&homogeneous(y))
}

/// The column-convention translation matrix `[[I, τ], [0, 1]]`.
pub fn translation_matrix(tau: &[f64]) -> Array2<f64> {
    let n = tau.len();
    let mut m = Array2::eye(n + 1);
    for (i, &v) in tau.iter().enumerate() {
        m[[i, n]] = v;
    }
    m
}

/// `x + τ`, computed as the homogeneous product `T(τ)·[x; 1]`.
pub fn apply_translation_matrix(x: &[f64], tau: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), tau.len(), "dimension mismatch");
    let out = translation_matrix(tau).dot(&homogeneous(x));
    debug_assert_eq!(out[x.len()], 1.0);
    out.slice(s![..x.len()]).to_vec()
}

/// Dense parameters of a model: entity embeddings and one relation row per
/// original and reciprocal relation.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub(crate) entities: Array2<f64>,
    pub(crate) rel_complex: Array2<f64>,
    pub(crate) rel_translation: Array2<f64>,
    kind: ModelKind,
}

impl EmbeddingTable {
    pub fn from_parts(
        entities: Array2<f64>,
        rel_complex: Array2<f64>,
        rel_translation: Array2<f64>,
        kind: ModelKind,
    ) -> Result<Self> {
        let n = entities.ncols();
        check_dim(n)?;
        if rel_complex.dim() != rel_translation.dim() || rel_complex.ncols() != n {
            return Err(Error::Mismatch(format!(
                "relation matrices {:?}/{:?} do not match dimension {n}",
                rel_complex.dim(),
                rel_translation.dim()
            )));
        }
        let mut table = EmbeddingTable {
            entities: entities.as_standard_layout().into_owned(),
            rel_complex: rel_complex.as_standard_layout().into_owned(),
            rel_translation: rel_translation.as_standard_layout().into_owned(),
            kind,
        };
        table.enforce_constraints();
        Ok(table)
    }

    /// Assembles a table without re-imposing constraints, so stored
    /// parameters come back bit for bit.
    pub(crate) fn from_raw(
        entities: Array2<f64>,
        rel_complex: Array2<f64>,
        rel_translation: Array2<f64>,
        kind: ModelKind,
    ) -> Self {
        EmbeddingTable {
            entities,
            rel_complex,
            rel_translation,
            kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.entities.ncols()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.nrows()
    }

    /// `2|R|`: original plus reciprocal relations.
    pub fn num_relation_rows(&self) -> usize {
        self.rel_complex.nrows()
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn entities(&self) -> ArrayView2<'_, f64> {
        self.entities.view()
    }

    pub fn relation_complex(&self) -> ArrayView2<'_, f64> {
        self.rel_complex.view()
    }

    pub fn relation_translation(&self) -> ArrayView2<'_, f64> {
        self.rel_translation.view()
    }

    pub fn entity(&self, id: usize) -> &[f64] {
        let n = self.dim();
        &self.entities.as_slice().expect("standard layout")[id * n..(id + 1) * n]
    }

    pub fn entity_mut(&mut self, id: usize) -> &mut [f64] {
        let n = self.dim();
        &mut self.entities.as_slice_mut().expect("standard layout")[id * n..(id + 1) * n]
    }

    pub fn relation(&self, id: usize) -> Relation<'_> {
        let n = self.dim();
        Relation {
            r_c: &self.rel_complex.as_slice().expect("standard layout")[id * n..(id + 1) * n],
            tau: &self.rel_translation.as_slice().expect("standard layout")[id * n..(id + 1) * n],
        }
    }

    pub fn set_relation(&mut self, id: usize, params: &RelationParams) {
        self.rel_complex
            .row_mut(id)
            .assign(&ArrayView1::from(&params.r_c[..]));
        self.rel_translation
            .row_mut(id)
            .assign(&ArrayView1::from(&params.tau[..]));
        self.enforce_constraints();
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Array2<f64>, &mut Array2<f64>, &mut Array2<f64>) {
        (
            &mut self.entities,
            &mut self.rel_complex,
            &mut self.rel_translation,
        )
    }

    fn check_entity(&self, id: usize) -> Result<()> {
        if id >= self.num_entities() {
            return Err(Error::OutOfRange {
                what: "entity",
                id,
                size: self.num_entities(),
            });
        }
        Ok(())
    }

    fn check_relation(&self, id: usize) -> Result<()> {
        if id >= self.num_relation_rows() {
            return Err(Error::OutOfRange {
                what: "relation",
                id,
                size: self.num_relation_rows(),
            });
        }
        Ok(())
    }

    pub fn score(&self, head: usize, relation: usize, tail: usize) -> Result<f64> {
        self.check_entity(head)?;
        self.check_entity(tail)?;
        self.check_relation(relation)?;
        Ok(score(
            self.entity(head),
            self.relation(relation),
            self.entity(tail),
        ))
    }

    /// Scores of `(head, relation, e)` for every entity `e`.
    pub fn score_batch(&self, head: usize, relation: usize) -> Result<Array1<f64>> {
        self.check_entity(head)?;
        self.check_relation(relation)?;
        let q = query_vector(self.entity(head), self.relation(relation));
        Ok(self.entities.dot(&Array1::from(q)) + 1.0)
    }

    /// Query matrix (one row `hᵀ R_c + τᵀ` per query) for a list of
    /// `(head, relation)` pairs.
    pub fn query_matrix(&self, queries: &[(u32, u32)]) -> Array2<f64> {
        let n = self.dim();
        let mut q = Array2::zeros((queries.len(), n));
        for (row, &(h, r)) in q.axis_iter_mut(Axis(0)).zip(queries) {
            let row = row.into_slice().expect("standard layout");
            query_vector_into(self.entity(h as usize), self.relation(r as usize), row);
        }
        q
    }

    /// Score matrix, one row per query, one column per candidate entity.
    pub fn score_queries(&self, queries: &[(u32, u32)]) -> Array2<f64> {
        self.query_matrix(queries).dot(&self.entities.t()) + 1.0
    }

    /// Re-imposes the constraints of the model kind.
    pub fn enforce_constraints(&mut self) {
        match self.kind {
            ModelKind::Star => {}
            ModelKind::Tar => {
                let n = self.dim();
                for mut row in self.rel_complex.axis_iter_mut(Axis(0)) {
                    for k in 0..n / 2 {
                        let (a, b) = (row[2 * k], row[2 * k + 1]);
                        let norm = (a * a + b * b).sqrt();
                        if norm > 0.0 {
                            row[2 * k] = a / norm;
                            row[2 * k + 1] = b / norm;
                        } else {
                            row[2 * k] = 1.0;
                            row[2 * k + 1] = 0.0;
                        }
                    }
                }
            }
            ModelKind::ComplEx => self.rel_translation.fill(0.0),
            ModelKind::DistMult => {
                self.rel_translation.fill(0.0);
                let n = self.dim();
                for mut row in self.rel_complex.axis_iter_mut(Axis(0)) {
                    for k in 0..n / 2 {
                        row[2 * k + 1] = 0.0;
                    }
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entities.iter().all(|v| v.is_finite())
            && self.rel_complex.iter().all(|v| v.is_finite())
            && self.rel_translation.iter().all(|v| v.is_finite())
    }
}

/// Random initial parameters: entity rows and `r_c` drawn from
/// `N(0, init_scale²)`, `τ = 0`, then the model-kind constraints applied.
pub fn init_embeddings(
    num_entities: usize,
    num_relations: usize,
    n: usize,
    kind: ModelKind,
    init_scale: f64,
    seed: u64,
) -> Result<EmbeddingTable> {
    check_dim(n)?;
    if !(init_scale > 0.0 && init_scale.is_finite()) {
        return Err(Error::config("init_scale", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, init_scale).expect("valid normal");
    let entities = Array2::from_shape_simple_fn((num_entities, n), || normal.sample(&mut rng));
    let rel_complex =
        Array2::from_shape_simple_fn((2 * num_relations, n), || normal.sample(&mut rng));
    let rel_translation = Array2::zeros((2 * num_relations, n));
    EmbeddingTable::from_parts(entities, rel_complex, rel_translation, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_example() {
        let rel = RelationParams::new(vec![2.0, 3.0], vec![5.0, 7.0]);
        assert_eq!(score(&[1.0, 0.0], rel.view(), &[0.0, 1.0]), 5.0);
    }

    #[test]
    fn identity_rotation_is_dot_product_plus_one() {
        let h = [0.3, -1.2, 0.5, 2.0];
        let t = [1.1, 0.4, -0.7, 0.2];
        let dot: f64 = h.iter().zip(&t).map(|(a, b)| a * b).sum();
        let id = RelationParams::identity(4);
        assert_abs_diff_eq!(score(&h, id.view(), &t), dot + 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_rotation_is_head_independent() {
        let rel = RelationParams::new(vec![0.0; 4], vec![0.5, -1.0, 2.0, 0.25]);
        let t = [1.0, 2.0, 3.0, 4.0];
        let expected = 0.5 - 2.0 + 6.0 + 1.0 + 1.0;
        for h in [[9.0, 1.0, -3.0, 0.0], [0.0; 4]] {
            assert_eq!(score(&h, rel.view(), &t), expected);
        }
    }

    #[test]
    fn materialized_small_case() {
        let rel = RelationParams::new(vec![1.5, -2.0], vec![0.25, 4.0]);
        let m = materialize_star_matrix(rel.view());
        let expected = ndarray::arr2(&[[1.5, 2.0, 0.0], [-2.0, 1.5, 0.0], [0.25, 4.0, 1.0]]);
        assert_eq!(m, expected);
        assert_eq!(
            materialize_star_matrix(RelationParams::identity(6).view()),
            Array2::<f64>::eye(7)
        );
    }

    #[test]
    fn translation_matrix_adds() {
        assert_eq!(apply_translation_matrix(&[1.0, 2.0], &[3.0, 4.0]), vec![4.0, 6.0]);
        assert_eq!(apply_translation_matrix(&[1.0, 2.0], &[0.0, 0.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn tau_gradient_is_tail() {
        let rel = RelationParams::new(vec![0.3, 0.4], vec![1.0, -1.0]);
        let g = score_gradients(&[2.0, 1.0], rel.view(), &[0.0, 1.0]);
        assert_eq!(g.d_tau, vec![0.0, 1.0]);
    }

    #[test]
    fn distmult_gradients_are_diagonal() {
        let rel = RelationParams::new(vec![2.0, 0.0, -1.0, 0.0], vec![0.0; 4]);
        let h = [1.0, 2.0, 3.0, 4.0];
        let t = [0.5, -0.5, 1.5, 2.5];
        let g = score_gradients(&h, rel.view(), &t);
        let r_diag = [2.0, 2.0, -1.0, -1.0];
        for i in 0..4 {
            assert_eq!(g.d_h[i], r_diag[i] * t[i]);
            assert_eq!(g.d_t[i], r_diag[i] * h[i]);
        }
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn mismatched_dimensions_panic() {
        let rel = RelationParams::identity(4);
        score(&[0.0; 4], rel.view(), &[0.0; 2]);
    }

    #[test]
    #[should_panic(expected = "even")]
    fn odd_dimension_panics() {
        let rel = Relation {
            r_c: &[1.0; 3],
            tau: &[0.0; 3],
        };
        score(&[0.0; 3], rel, &[0.0; 3]);
    }

    #[test]
    fn init_is_deterministic_and_constrained() {
        let a = init_embeddings(10, 3, 8, ModelKind::Star, 1e-3, 7).unwrap();
        let b = init_embeddings(10, 3, 8, ModelKind::Star, 1e-3, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_relation_rows(), 6);

        let c = init_embeddings(10, 3, 8, ModelKind::ComplEx, 1e-3, 7).unwrap();
        assert!(c.relation_translation().iter().all(|&v| v == 0.0));

        let d = init_embeddings(10, 3, 8, ModelKind::DistMult, 1e-3, 7).unwrap();
        for r in 0..6 {
            let rel = d.relation(r);
            assert!((0..4).all(|k| rel.r_c[2 * k + 1] == 0.0));
        }

        let t = init_embeddings(10, 3, 8, ModelKind::Tar, 1e-3, 7).unwrap();
        for r in 0..6 {
            let rel = t.relation(r);
            for k in 0..4 {
                let norm = rel.r_c[2 * k].hypot(rel.r_c[2 * k + 1]);
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
            }
        }
        assert!(init_embeddings(10, 3, 7, ModelKind::Star, 1e-3, 7).is_err());
    }

    #[test]
    fn init_scale_matches_sample_std() {
        let table = init_embeddings(20_000, 1, 8, ModelKind::Star, 1e-3, 3).unwrap();
        let vals = table.entities();
        let count = vals.len() as f64;
        assert!(count >= 1e5);
        let mean = vals.sum() / count;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
        let std = var.sqrt();
        assert!((std - 1e-3).abs() < 0.2e-3, "std {std}");
    }

    #[test]
    fn score_batch_single_entity() {
        let table = init_embeddings(1, 1, 4, ModelKind::Star, 0.5, 1).unwrap();
        let batch = table.score_batch(0, 1).unwrap();
        assert_eq!(batch.len(), 1);
        assert_abs_diff_eq!(batch[0], table.score(0, 1, 0).unwrap(), epsilon = 1e-12);
        assert!(table.score_batch(1, 0).is_err());
        assert!(table.score_batch(0, 2).is_err());
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("STaR".parse::<ModelKind>().unwrap(), ModelKind::Star);
        let err = "rescal".parse::<ModelKind>().unwrap_err();
        assert!(err.to_string().contains("model_kind"));
    }
}
