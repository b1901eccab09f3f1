//! Filtered link-prediction ranking.
//!
//! Every evaluation triple `(h, r, t)` yields a tail query `(h, r, ?)` and a
//! head query `(t, r + |R|, ?)` answered through the reciprocal relation.
//! Candidates known to be true from any split are removed before ranking.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ComplexityClass, FilterIndex, RelationClassification, Triple, TripleStore};
use crate::error::{Error, Result};
use crate::model::EmbeddingTable;

pub const HITS_AT: [u32; 3] = [1, 3, 10];

/// How candidates scoring exactly like the true answer are ordered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// The true answer goes after every tied rival.
    #[default]
    Pessimistic,
    /// The true answer takes a uniformly random slot among its ties.
    Random,
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pessimistic" => Ok(TieRule::Pessimistic),
            "random" => Ok(TieRule::Random),
            _ => Err(Error::config(
                "tie_rule",
                format!("unknown tie rule '{s}' (expected pessimistic or random)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Tail,
    Head,
    #[default]
    Both,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Tail => "tail",
            Direction::Head => "head",
            Direction::Both => "both",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub tie_rule: TieRule,
    pub direction: Direction,
    /// Seeds the random tie rule; ignored otherwise.
    pub seed: u64,
}

/// A ranking query `(head, relation, ?)` with its true answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Query {
    pub head: u32,
    pub relation: u32,
    pub answer: u32,
}

impl Query {
    pub fn tail(t: &Triple) -> Self {
        Query {
            head: t.head,
            relation: t.relation,
            answer: t.tail,
        }
    }

    pub fn head(t: &Triple, num_relations: usize) -> Self {
        Query::tail(&t.reciprocal(num_relations))
    }
}

/// Queries for a list of triples in the given direction, tail query first.
pub fn queries_for(triples: &[Triple], num_relations: usize, direction: Direction) -> Vec<Query> {
    let mut out = Vec::with_capacity(triples.len() * 2);
    for t in triples {
        if direction != Direction::Head {
            out.push(Query::tail(t));
        }
        if direction != Direction::Tail {
            out.push(Query::head(t, num_relations));
        }
    }
    out
}

/// Filtered rank of `answer` given the scores of every candidate.
///
/// `known` must be sorted; entries other than `answer` are skipped.
pub fn rank_from_scores(
    scores: &[f64],
    answer: u32,
    known: &[u32],
    tie_rule: TieRule,
    rng: &mut impl Rng,
) -> usize {
    let target = scores[answer as usize];
    let mut greater = 0usize;
    let mut ties = 0usize;
    let mut filtered = known.iter().copied().peekable();
    for (j, &s) in scores.iter().enumerate() {
        let j = j as u32;
        while filtered.peek().is_some_and(|&k| k < j) {
            filtered.next();
        }
        if j == answer || filtered.peek() == Some(&j) {
            continue;
        }
        if s > target {
            greater += 1;
        } else if s == target {
            ties += 1;
        }
    }
    let tie_offset = match tie_rule {
        TieRule::Pessimistic => ties,
        TieRule::Random => rng.random_range(0..=ties),
    };
    1 + greater + tie_offset
}

fn query_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn check_query(table: &EmbeddingTable, filter: &FilterIndex, q: &Query) -> Result<()> {
    let ne = table.num_entities();
    for id in [q.head, q.answer] {
        if id as usize >= ne {
            return Err(Error::OutOfRange {
                what: "entity",
                id: id as usize,
                size: ne,
            });
        }
    }
    if q.relation as usize >= table.num_relation_rows() {
        return Err(Error::OutOfRange {
            what: "relation",
            id: q.relation as usize,
            size: table.num_relation_rows(),
        });
    }
    if filter.known(q.head, q.relation).binary_search(&q.answer).is_err() {
        return Err(Error::Mismatch(format!(
            "query ({}, {}, {}) is not in the filter index",
            q.head, q.relation, q.answer
        )));
    }
    Ok(())
}

/// Filtered rank of a single query, scored one candidate at a time.
pub fn filtered_rank(
    query: Query,
    table: &EmbeddingTable,
    filter: &FilterIndex,
    tie_rule: TieRule,
    rng: &mut impl Rng,
) -> Result<usize> {
    check_query(table, filter, &query)?;
    let scores = table.score_batch(query.head as usize, query.relation as usize)?;
    Ok(rank_from_scores(
        scores.as_slice().expect("contiguous"),
        query.answer,
        filter.known(query.head, query.relation),
        tie_rule,
        rng,
    ))
}

const CHUNK: usize = 256;

/// Filtered ranks of many queries, in order. Scores are computed in blocks
/// and blocks are ranked in parallel; results do not depend on the thread
/// count.
pub fn rank_queries(
    queries: &[Query],
    table: &EmbeddingTable,
    filter: &FilterIndex,
    options: &EvalOptions,
) -> Result<Vec<usize>> {
    for q in queries {
        check_query(table, filter, q)?;
    }
    let chunks: Vec<Vec<usize>> = queries
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let pairs: Vec<(u32, u32)> = chunk.iter().map(|q| (q.head, q.relation)).collect();
            let scores = table.score_queries(&pairs);
            chunk
                .iter()
                .zip(scores.rows())
                .enumerate()
                .map(|(i, (q, row))| {
                    let mut rng = query_rng(options.seed, c * CHUNK + i);
                    rank_from_scores(
                        row.as_slice().expect("contiguous"),
                        q.answer,
                        filter.known(q.head, q.relation),
                        options.tie_rule,
                        &mut rng,
                    )
                })
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mrr: f64,
    /// Hits@K keyed by K.
    pub hits: BTreeMap<u32, f64>,
    pub count: usize,
}

impl Metrics {
    pub fn from_ranks(ranks: &[usize]) -> Self {
        let count = ranks.len();
        let denom = count.max(1) as f64;
        let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / denom;
        let hits = HITS_AT
            .iter()
            .map(|&k| {
                let h = ranks.iter().filter(|&&r| r <= k as usize).count();
                (k, h as f64 / denom)
            })
            .collect();
        Metrics { mrr, hits, count }
    }

    pub fn hits_at(&self, k: u32) -> f64 {
        self.hits.get(&k).copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationMetrics {
    pub relation: u32,
    pub name: String,
    /// Share of the evaluated triples that use this relation.
    pub proportion: f64,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub direction: Direction,
    pub tie_rule: TieRule,
    pub mrr: f64,
    pub hits: BTreeMap<u32, f64>,
    pub queries: usize,
    pub per_relation: Vec<RelationMetrics>,
    pub per_class: BTreeMap<ComplexityClass, Metrics>,
}

impl EvalReport {
    pub fn hits_at(&self, k: u32) -> f64 {
        self.hits.get(&k).copied().unwrap_or(f64::NAN)
    }

    /// Hits monotonicity, `mrr ≥ hits@1` and per-relation counts summing to
    /// the number of queries.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let (h1, h3, h10) = (self.hits_at(1), self.hits_at(3), self.hits_at(10));
        if !(h1 <= h3 && h3 <= h10 && h10 <= 1.0) {
            return Err(format!("hits not monotone: {h1} {h3} {h10}"));
        }
        if self.mrr + 1e-12 < h1 || self.mrr > 1.0 + 1e-12 {
            return Err(format!("mrr {} inconsistent with hits@1 {h1}", self.mrr));
        }
        let total: usize = self.per_relation.iter().map(|r| r.metrics.count).sum();
        if total != self.queries {
            return Err(format!("per-relation counts {total} != {}", self.queries));
        }
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// One row per relation: name, proportion of evaluated triples, MRR.
    pub fn write_relation_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("relation,proportion,mrr\n");
        for r in &self.per_relation {
            out.push_str(&format!(
                "{},{:.6},{:.6}\n",
                csv_field(&r.name),
                r.proportion,
                r.metrics.mrr
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_class_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("class,count,mrr\n");
        for (class, m) in &self.per_class {
            out.push_str(&format!("{},{},{:.6}\n", class.label(), m.count, m.mrr));
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Ranks every query of `triples` and aggregates globally, per relation and
/// per complexity class.
pub fn evaluate_triples(
    split_name: &str,
    triples: &[Triple],
    table: &EmbeddingTable,
    store: &TripleStore,
    classes: Option<&RelationClassification>,
    options: &EvalOptions,
) -> Result<EvalReport> {
    if triples.is_empty() {
        return Err(Error::EmptySplit(match split_name {
            "train" => "train",
            "valid" => "valid",
            "test" => "test",
            _ => "evaluation",
        }));
    }
    let nr = store.num_relations();
    if table.num_entities() != store.num_entities() || table.num_relation_rows() != 2 * nr {
        return Err(Error::Mismatch(format!(
            "table has {} entities / {} relation rows, store has {} / {}",
            table.num_entities(),
            table.num_relation_rows(),
            store.num_entities(),
            2 * nr
        )));
    }
    let queries = queries_for(triples, nr, options.direction);
    let ranks = rank_queries(&queries, table, store.filter(), options)?;

    let mut by_relation: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let mut by_class: BTreeMap<ComplexityClass, Vec<usize>> = BTreeMap::new();
    let mut triples_per_relation: BTreeMap<u32, usize> = BTreeMap::new();
    for t in triples {
        *triples_per_relation.entry(t.relation).or_default() += 1;
    }
    for (q, &rank) in queries.iter().zip(&ranks) {
        let base = q.relation % nr as u32;
        by_relation.entry(base).or_default().push(rank);
        if let Some(class) = classes.and_then(|c| c.class_of(base)) {
            by_class.entry(class).or_default().push(rank);
        }
    }
    let global = Metrics::from_ranks(&ranks);
    let per_relation = by_relation
        .into_iter()
        .map(|(relation, ranks)| RelationMetrics {
            relation,
            name: store.vocab().relation_name(relation).to_owned(),
            proportion: triples_per_relation[&relation] as f64 / triples.len() as f64,
            metrics: Metrics::from_ranks(&ranks),
        })
        .collect();
    let per_class = by_class
        .into_iter()
        .map(|(c, ranks)| (c, Metrics::from_ranks(&ranks)))
        .collect();
    Ok(EvalReport {
        split: split_name.to_owned(),
        direction: options.direction,
        tie_rule: options.tie_rule,
        mrr: global.mrr,
        hits: global.hits,
        queries: global.count,
        per_relation,
        per_class,
    })
}

/// [`evaluate_triples`] over a named split of the store.
pub fn evaluate(
    split: crate::data::Split,
    table: &EmbeddingTable,
    store: &TripleStore,
    classes: Option<&RelationClassification>,
    options: &EvalOptions,
) -> Result<EvalReport> {
    evaluate_triples(split.name(), store.split(split), table, store, classes, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn unique_maximum_ranks_first() {
        let scores = [0.1, 0.9, 0.3];
        assert_eq!(rank_from_scores(&scores, 1, &[1], TieRule::Pessimistic, &mut rng()), 1);
    }

    #[test]
    fn known_answers_are_filtered() {
        let scores = [5.0, 4.0, 3.0, 2.0];
        assert_eq!(rank_from_scores(&scores, 2, &[2], TieRule::Pessimistic, &mut rng()), 3);
        assert_eq!(
            rank_from_scores(&scores, 2, &[0, 1, 2], TieRule::Pessimistic, &mut rng()),
            1
        );
    }

    #[test]
    fn all_tied_pessimistic_is_last() {
        let scores = [1.0; 5];
        assert_eq!(rank_from_scores(&scores, 0, &[0], TieRule::Pessimistic, &mut rng()), 5);
    }

    #[test]
    fn all_tied_random_averages_to_middle() {
        let scores = [1.0; 5];
        let mut r = rng();
        let trials = 20_000;
        let mean = (0..trials)
            .map(|_| rank_from_scores(&scores, 0, &[0], TieRule::Random, &mut r) as f64)
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 3.0).abs() < 0.05, "mean rank {mean}");
    }

    #[test]
    fn metric_arithmetic() {
        let m = Metrics::from_ranks(&[1, 4]);
        assert_eq!(m.mrr, 0.625);
        assert_eq!(m.hits_at(1), 0.5);
        assert_eq!(m.hits_at(3), 0.5);
        assert_eq!(m.hits_at(10), 1.0);
        let one = Metrics::from_ranks(&[1, 1]);
        assert_eq!(one.mrr, 1.0);
        assert!(HITS_AT.iter().all(|&k| one.hits_at(k) == 1.0));
    }

    #[test]
    fn tie_rule_parsing() {
        assert_eq!("random".parse::<TieRule>().unwrap(), TieRule::Random);
        assert!("optimistic".parse::<TieRule>().is_err());
    }
}
