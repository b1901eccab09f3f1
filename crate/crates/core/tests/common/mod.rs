//! Helpers shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use star_kge::data::{Triple, TripleStore, Vocab};
use star_kge::model::{EmbeddingTable, ModelKind, RelationParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn relation(rng: &mut impl Rng, n: usize) -> RelationParams {
    RelationParams::new(vector(rng, n), vector(rng, n))
}

/// Vocabulary with entities `e0..` and relations `r0..`.
pub fn vocab(num_entities: usize, num_relations: usize) -> Vocab {
    let mut v = Vocab::new();
    for e in 0..num_entities {
        v.intern_entity(&format!("e{e}"));
    }
    for r in 0..num_relations {
        v.intern_relation(&format!("r{r}"));
    }
    v
}

pub fn store(
    num_entities: usize,
    num_relations: usize,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
) -> TripleStore {
    TripleStore::from_splits(vocab(num_entities, num_relations), train, valid, test).unwrap()
}

pub fn random_triples(rng: &mut impl Rng, count: usize, ne: usize, nr: usize) -> Vec<Triple> {
    (0..count)
        .map(|_| {
            Triple::new(
                rng.random_range(0..ne as u32),
                rng.random_range(0..nr as u32),
                rng.random_range(0..ne as u32),
            )
        })
        .collect()
}

/// A table whose every parameter is drawn uniformly from `[-scale, scale]`.
pub fn random_table(
    rng: &mut impl Rng,
    ne: usize,
    nr: usize,
    n: usize,
    kind: ModelKind,
    scale: f64,
) -> EmbeddingTable {
    let mut draw = |rows: usize| Array2::from_shape_simple_fn((rows, n), || rng.random_range(-scale..scale));
    let entities = draw(ne);
    let rel_c = draw(2 * nr);
    let tau = draw(2 * nr);
    EmbeddingTable::from_parts(entities, rel_c, tau, kind).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
