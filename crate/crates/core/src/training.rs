//! Full-softmax cross-entropy training in the reciprocal setting.
//!
//! Each train triple `(h, r, t)` contributes two queries: `(h, r, ?)` with
//! answer `t` and `(t, r + |R|, ?)` with answer `h`. The loss of a query is
//! `-w · log softmax(answer)` over every entity, plus `λ · Reg` of the query
//! triple. A batch loss is the mean over its `2·|batch|` queries.

use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{entity_frequency, EntityCounts, Side, Split, Triple, TripleStore};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions};
use crate::model::{backprop_query, check_dim, init_embeddings, EmbeddingTable, ModelKind};
use crate::regularization::RegConfig;

pub const ADAGRAD_EPSILON: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adagrad,
    Sgd,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adagrad" => Ok(OptimizerKind::Adagrad),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::config(
                "optimizer",
                format!("unknown optimizer '{s}' (expected adagrad or sgd)"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    pub dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub w0: f64,
    pub reg: RegConfig,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Validate every this many epochs; 0 disables validation.
    pub eval_every: usize,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model_kind: ModelKind::Star,
            dim: 500,
            lr: 0.1,
            batch_size: 100,
            epochs: 100,
            w0: 0.0,
            reg: RegConfig::none(),
            seed: 0,
            optimizer: OptimizerKind::Adagrad,
            eval_every: 5,
            init_scale: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim).map_err(|_| Error::config("dim", "must be a positive even number"))?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.w0) {
            return Err(Error::config("w0", "must lie in [0, 1]"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be positive"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config("init_scale", "must be positive"));
        }
        self.reg.validate()
    }
}

/// `w0 · #e / max #e + (1 − w0)`.
pub fn tail_weight(entity: u32, counts: &EntityCounts, w0: f64) -> Result<f64> {
    if counts.counts.is_empty() || counts.max == 0 {
        return Err(Error::Undefined("entity counts are empty".into()));
    }
    let c = counts.counts[entity as usize] as f64;
    Ok(w0 * c / counts.max as f64 + (1.0 - w0))
}

/// Per-entity weights for tail queries and for (reciprocal) head queries.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryWeights {
    pub tail: Vec<f64>,
    pub head: Vec<f64>,
}

impl QueryWeights {
    pub fn uniform(num_entities: usize) -> Self {
        QueryWeights {
            tail: vec![1.0; num_entities],
            head: vec![1.0; num_entities],
        }
    }

    pub fn from_store(store: &TripleStore, w0: f64) -> Result<Self> {
        let build = |side| -> Result<Vec<f64>> {
            let counts = entity_frequency(store, side);
            (0..store.num_entities() as u32)
                .map(|e| tail_weight(e, &counts, w0))
                .collect()
        };
        Ok(QueryWeights {
            tail: build(Side::Tail)?,
            head: build(Side::Head)?,
        })
    }
}

/// Dense gradients with the same shapes as the table.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub entities: Array2<f64>,
    pub rel_complex: Array2<f64>,
    pub rel_translation: Array2<f64>,
}

impl Gradients {
    pub fn zeros_like(table: &EmbeddingTable) -> Self {
        Gradients {
            entities: Array2::zeros(table.entities().raw_dim()),
            rel_complex: Array2::zeros(table.relation_complex().raw_dim()),
            rel_translation: Array2::zeros(table.relation_translation().raw_dim()),
        }
    }

    /// Zeroes the components a model kind keeps fixed.
    pub fn mask(&mut self, kind: ModelKind) {
        match kind {
            ModelKind::Star | ModelKind::Tar => {}
            ModelKind::ComplEx => self.rel_translation.fill(0.0),
            ModelKind::DistMult => {
                self.rel_translation.fill(0.0);
                for mut row in self.rel_complex.axis_iter_mut(Axis(0)) {
                    for k in 0..row.len() / 2 {
                        row[2 * k + 1] = 0.0;
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct BatchLoss {
    pub loss: f64,
    pub grads: Gradients,
}

fn row_mut(m: &mut Array2<f64>, i: usize) -> &mut [f64] {
    let n = m.ncols();
    &mut m.as_slice_mut().expect("standard layout")[i * n..(i + 1) * n]
}

/// Mean weighted cross-entropy plus regularization over the `2·|batch|`
/// queries of `batch`, and its exact gradient.
pub fn batch_loss(
    batch: &[Triple],
    table: &EmbeddingTable,
    weights: &QueryWeights,
    reg: &RegConfig,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::Undefined("empty batch".into()));
    }
    let nr = table.num_relation_rows() / 2;
    let ne = table.num_entities();
    let mut pairs = Vec::with_capacity(2 * batch.len());
    let mut answers = Vec::with_capacity(2 * batch.len());
    let mut w = Vec::with_capacity(2 * batch.len());
    for t in batch {
        for id in [t.head, t.tail] {
            if id as usize >= ne {
                return Err(Error::OutOfRange {
                    what: "entity",
                    id: id as usize,
                    size: ne,
                });
            }
        }
        if t.relation as usize >= nr {
            return Err(Error::OutOfRange {
                what: "relation",
                id: t.relation as usize,
                size: nr,
            });
        }
        pairs.push((t.head, t.relation));
        answers.push(t.tail);
        w.push(weights.tail[t.tail as usize]);
        let rec = t.reciprocal(nr);
        pairs.push((rec.head, rec.relation));
        answers.push(rec.tail);
        w.push(weights.head[rec.tail as usize]);
    }
    let nq = pairs.len();
    let inv_nq = 1.0 / nq as f64;

    let q = table.query_matrix(&pairs);
    let mut scores = table.score_queries(&pairs);
    let mut total = 0.0;
    for (i, mut row) in scores.axis_iter_mut(Axis(0)).enumerate() {
        let row = row.as_slice_mut().expect("standard layout");
        let answer = answers[i] as usize;
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let true_score = row[answer];
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let lse = max + sum.ln();
        total += w[i] * (lse - true_score);
        let scale = w[i] * inv_nq / sum;
        for v in row.iter_mut() {
            *v *= scale;
        }
        row[answer] -= w[i] * inv_nq;
    }
    // `scores` now holds dLoss/dScore.
    let d_q = scores.dot(&table.entities());
    let mut grads = Gradients {
        entities: scores.t().dot(&q),
        rel_complex: Array2::zeros(table.relation_complex().raw_dim()),
        rel_translation: Array2::zeros(table.relation_translation().raw_dim()),
    };
    let n = table.dim();
    let mut d_h = vec![0.0; n];
    let mut d_rc = vec![0.0; n];
    let mut d_tau = vec![0.0; n];
    for (i, &(h, r)) in pairs.iter().enumerate() {
        d_h.fill(0.0);
        d_rc.fill(0.0);
        d_tau.fill(0.0);
        let rel = table.relation(r as usize);
        let head = table.entity(h as usize);
        let dq = d_q.row(i);
        backprop_query(
            dq.as_slice().expect("standard layout"),
            head,
            rel,
            &mut d_h,
            &mut d_rc,
            &mut d_tau,
        );
        if reg.is_active() {
            let tail = table.entity(answers[i] as usize);
            let (penalty, g) = reg.penalty_with_grad(head, rel, tail);
            total += reg.lambda * penalty;
            let c = reg.lambda * inv_nq;
            let d_t = row_mut(&mut grads.entities, answers[i] as usize);
            for k in 0..n {
                d_t[k] += c * g.d_t[k];
                d_h[k] += c * g.d_h[k];
                d_rc[k] += c * g.d_r_c[k];
                d_tau[k] += c * g.d_tau[k];
            }
        }
        for (dst, src) in row_mut(&mut grads.entities, h as usize).iter_mut().zip(&d_h) {
            *dst += src;
        }
        for (dst, src) in row_mut(&mut grads.rel_complex, r as usize).iter_mut().zip(&d_rc) {
            *dst += src;
        }
        for (dst, src) in row_mut(&mut grads.rel_translation, r as usize)
            .iter_mut()
            .zip(&d_tau)
        {
            *dst += src;
        }
    }
    Ok(BatchLoss {
        loss: total * inv_nq,
        grads,
    })
}

/// One Adagrad step on a parameter row: the accumulator gathers squared
/// gradients and the step is `lr · g / sqrt(acc + ε)`.
pub fn adagrad_update(param: &mut [f64], grad: &[f64], accumulator: &mut [f64], lr: f64) {
    assert!(param.len() == grad.len() && grad.len() == accumulator.len());
    for ((p, &g), a) in param.iter_mut().zip(grad).zip(accumulator.iter_mut()) {
        *a += g * g;
        *p -= lr * g / (*a + ADAGRAD_EPSILON).sqrt();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OptimizerState {
    Adagrad(Gradients),
    Sgd,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, table: &EmbeddingTable) -> Self {
        match kind {
            OptimizerKind::Adagrad => OptimizerState::Adagrad(Gradients::zeros_like(table)),
            OptimizerKind::Sgd => OptimizerState::Sgd,
        }
    }

    /// Applies one update and re-imposes the model-kind constraints.
    pub fn step(&mut self, table: &mut EmbeddingTable, grads: &Gradients, lr: f64) {
        let kind = table.kind();
        {
            let (ent, rc, tau) = table.params_mut();
            let pairs = [
                (ent, &grads.entities),
                (rc, &grads.rel_complex),
                (tau, &grads.rel_translation),
            ];
            match self {
                OptimizerState::Adagrad(acc) => {
                    let accs = [
                        &mut acc.entities,
                        &mut acc.rel_complex,
                        &mut acc.rel_translation,
                    ];
                    for ((param, grad), acc) in pairs.into_iter().zip(accs) {
                        adagrad_update(
                            param.as_slice_mut().expect("standard layout"),
                            grad.as_slice().expect("standard layout"),
                            acc.as_slice_mut().expect("standard layout"),
                            lr,
                        );
                    }
                }
                OptimizerState::Sgd => {
                    for (param, grad) in pairs {
                        param.scaled_add(-lr, grad);
                    }
                }
            }
        }
        if kind != ModelKind::Star {
            table.enforce_constraints();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_mrr: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The best-validation table, or the last one when validation never ran.
    pub table: EmbeddingTable,
    /// Epoch of `table` (0 = initialization).
    pub epoch: usize,
    pub best_valid_mrr: Option<f64>,
    pub log: Vec<EpochLog>,
}

/// Trains a freshly initialized table on the train split of `store`.
pub fn train(store: &TripleStore, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(store, config, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with(
    store: &TripleStore,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if store.train().is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    let mut table = init_embeddings(
        store.num_entities(),
        store.num_relations(),
        config.dim,
        config.model_kind,
        config.init_scale,
        config.seed,
    )?;
    let weights = QueryWeights::from_store(store, config.w0)?;
    let mut optimizer = OptimizerState::new(config.optimizer, &table);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..store.train().len()).collect();
    let validate = config.eval_every > 0 && !store.split(Split::Valid).is_empty();

    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, EmbeddingTable)> = None;
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 1..=config.epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| store.train()[i]));
            let mut out = batch_loss(&batch, &table, &weights, &config.reg)?;
            if !out.loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "loss",
                    epoch,
                    batch: b,
                });
            }
            loss_sum += out.loss * batch.len() as f64;
            out.grads.mask(config.model_kind);
            optimizer.step(&mut table, &out.grads, config.lr);
            if !table.is_finite() {
                return Err(Error::NonFinite {
                    what: "parameters",
                    epoch,
                    batch: b,
                });
            }
        }
        let mut entry = EpochLog {
            epoch,
            mean_loss: loss_sum / store.train().len() as f64,
            valid_mrr: None,
            wall_ms: 0,
        };
        if validate && (epoch % config.eval_every == 0 || epoch == config.epochs) {
            let report = evaluate(Split::Valid, &table, store, None, &EvalOptions::default())?;
            entry.valid_mrr = Some(report.mrr);
            if best.as_ref().is_none_or(|(mrr, _, _)| report.mrr > *mrr) {
                best = Some((report.mrr, epoch, table.clone()));
            }
        }
        entry.wall_ms = start.elapsed().as_millis() as u64;
        log::info!(
            "epoch {epoch}: loss {:.6}{}",
            entry.mean_loss,
            entry
                .valid_mrr
                .map(|m| format!(", valid mrr {m:.4}"))
                .unwrap_or_default()
        );
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(match best {
        Some((mrr, epoch, table)) => TrainOutcome {
            table,
            epoch,
            best_valid_mrr: Some(mrr),
            log,
        },
        None => TrainOutcome {
            table,
            epoch: config.epochs,
            best_valid_mrr: None,
            log,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Vocab;
    use crate::model::init_embeddings;

    fn counts(v: &[u64]) -> EntityCounts {
        EntityCounts {
            counts: v.to_vec(),
            max: v.iter().copied().max().unwrap_or(0),
        }
    }

    #[test]
    fn weight_formula() {
        let c = counts(&[0, 3, 6]);
        assert_eq!(tail_weight(0, &c, 0.0).unwrap(), 1.0);
        assert!((tail_weight(2, &c, 0.7).unwrap() - 1.0).abs() < 1e-15);
        assert!((tail_weight(0, &c, 0.1).unwrap() - 0.9).abs() < 1e-15);
        assert!((tail_weight(1, &c, 0.1).unwrap() - 0.95).abs() < 1e-15);
        assert!(tail_weight(0, &counts(&[]), 0.1).is_err());
    }

    #[test]
    fn adagrad_first_step_is_sign() {
        let mut p = [1.0, 1.0, 1.0];
        let mut acc = [0.0; 3];
        adagrad_update(&mut p, &[2.0, -0.5, 0.0], &mut acc, 0.1);
        assert!((p[0] - 0.9).abs() < 1e-9);
        assert!((p[1] - 1.1).abs() < 1e-9);
        assert_eq!(p[2], 1.0);
        assert_eq!(acc, [4.0, 0.25, 0.0]);
    }

    #[test]
    fn adagrad_second_step_shrinks() {
        let mut p = [0.0];
        let mut acc = [0.0];
        adagrad_update(&mut p, &[1.0], &mut acc, 1.0);
        let first = -p[0];
        adagrad_update(&mut p, &[1.0], &mut acc, 1.0);
        let second = -p[0] - first;
        assert!((second / first - 1.0 / 2f64.sqrt()).abs() < 1e-9);
    }

    fn one_relation_store(ne: usize, triples: &[(u32, u32)]) -> TripleStore {
        let names = (0..ne).map(|i| format!("e{i}")).collect();
        let vocab = Vocab::from_names(names, vec!["r".into()]).unwrap();
        let train = triples.iter().map(|&(h, t)| Triple::new(h, 0, t)).collect();
        TripleStore::from_splits(vocab, train, vec![], vec![]).unwrap()
    }

    #[test]
    fn single_entity_loss_is_zero() {
        let table = init_embeddings(1, 1, 4, ModelKind::Star, 0.3, 0).unwrap();
        let out = batch_loss(
            &[Triple::new(0, 0, 0)],
            &table,
            &QueryWeights::uniform(1),
            &RegConfig::none(),
        )
        .unwrap();
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn uniform_scores_give_log_candidates() {
        let mut table = init_embeddings(4, 1, 4, ModelKind::Star, 0.3, 0).unwrap();
        table.params_mut().0.fill(0.0);
        let out = batch_loss(
            &[Triple::new(0, 0, 1)],
            &table,
            &QueryWeights::uniform(4),
            &RegConfig::none(),
        )
        .unwrap();
        assert!((out.loss - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let store = one_relation_store(3, &[(0, 1), (1, 2)]);
        let cfg = TrainConfig {
            dim: 4,
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&store, &cfg).unwrap();
        let init = init_embeddings(3, 1, 4, ModelKind::Star, cfg.init_scale, cfg.seed).unwrap();
        assert_eq!(out.table, init);
        assert!(out.log.is_empty());
    }

    #[test]
    fn config_validation() {
        let bad = |f: fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            c.validate().unwrap_err().to_string()
        };
        assert!(bad(|c| c.batch_size = 0).contains("batch_size"));
        assert!(bad(|c| c.w0 = 1.5).contains("w0"));
        assert!(bad(|c| c.dim = 5).contains("dim"));
    }

    #[test]
    fn complex_training_keeps_translation_zero() {
        let store = one_relation_store(4, &[(0, 1), (1, 2), (2, 3)]);
        let cfg = TrainConfig {
            model_kind: ModelKind::ComplEx,
            dim: 4,
            epochs: 3,
            batch_size: 2,
            eval_every: 0,
            init_scale: 0.1,
            ..TrainConfig::default()
        };
        let out = train(&store, &cfg).unwrap();
        assert!(out.table.relation_translation().iter().all(|&v| v == 0.0));
    }
}
