//! Acceptance suite. Each test prints one `criterion N [PASS|FAIL]` line.
//!
//! Dataset-backed criteria read `$STAR_DATA_DIR/{WN18RR,FB15K237}`, falling
//! back to `<workspace>/data`; `scripts/fetch_datasets.sh` downloads them.
//! Criterion 7 trains for a long time and is ignored by default:
//! `cargo test --release --test acceptance -- --ignored`.

mod common;

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use common::{random_table, random_triples, relation, rng, store, vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use star_kge::analysis::{analyze, count_two_paths, pair_imbalance, CountPolicy};
use star_kge::data::{Split, TripleStore};
use star_kge::eval::{
    evaluate, evaluate_triples, queries_for, rank_queries, Direction, EvalOptions, TieRule,
};
use star_kge::model::{
    bilinear_form, materialize_star_matrix, score, score_gradients, EmbeddingTable, ModelKind,
    RelationParams, StarKernel,
};
use star_kge::patterns::{
    central_difference, gradient_error, max_gradient_error, verify_suite, VerifyConfig, FD_STEP,
    FD_TOLERANCE,
};
use star_kge::regularization::{
    dura_gradient, dura_penalty, fro_gradient, fro_penalty, DuraVariant, RegConfig,
};
use star_kge::synth::{family_spec, generate};
use star_kge::training::{batch_loss, train, QueryWeights, TrainConfig};

fn verdict(id: u32, title: &str, ok: bool, detail: String) {
    // The stderr handle bypasses libtest's capture, so the line is shown
    // for passing tests too.
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id} [{}] {title}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id} ({title}) failed: {detail}");
}

fn data_dir() -> PathBuf {
    std::env::var_os("STAR_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn dataset(name: &str) -> PathBuf {
    let dir = data_dir().join(name);
    assert!(
        dir.join("train.txt").exists(),
        "{} not found: run scripts/fetch_datasets.sh or point STAR_DATA_DIR at a directory \
         holding {name}/train.txt",
        dir.display()
    );
    dir
}

#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in [2, 4, 8, 16] {
        let mut r = rng(n as u64);
        for _ in 0..10_000 {
            let (h, t) = (vector(&mut r, n), vector(&mut r, n));
            let rel = relation(&mut r, n);
            let m = materialize_star_matrix(rel.view());
            let fast = score(&h, rel.view(), &t);
            let slow = bilinear_form(&h, &m.view(), &t);
            worst = worst.max((fast - slow).abs() / slow.abs().max(f64::MIN_POSITIVE));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "oracle equivalence",
        worst < 1e-10 && secs < 5.0,
        format!("max relative error {worst:.2e} over 40000 draws in {secs:.2}s"),
    );
}

type Objective = dyn Fn(&[f64], &RelationParams, &[f64]) -> f64;

/// Largest finite-difference error of every penalty and of the score for
/// one random triple.
fn triple_gradient_error(r: &mut impl Rng, n: usize) -> f64 {
    let (h, t) = (vector(r, n), vector(r, n));
    let rel = relation(r, n);
    let check = |f: &Objective, g: star_kge::model::ScoreGradient| {
        [
            max_gradient_error(|x| f(x, &rel, &t), &h, &g.d_h, FD_STEP),
            max_gradient_error(|x| f(&h, &rel, x), &t, &g.d_t, FD_STEP),
            max_gradient_error(
                |x| f(&h, &RelationParams::new(x.to_vec(), rel.tau.clone()), &t),
                &rel.r_c,
                &g.d_r_c,
                FD_STEP,
            ),
            max_gradient_error(
                |x| f(&h, &RelationParams::new(rel.r_c.clone(), x.to_vec()), &t),
                &rel.tau,
                &g.d_tau,
                FD_STEP,
            ),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    };
    let v = rel.view();
    [
        check(&|h, rel, t| score(h, rel.view(), t), score_gradients(&h, v, &t)),
        check(&|h, rel, t| fro_penalty(h, rel.view(), t), fro_gradient(&h, v, &t)),
        check(
            &|h, rel, t| dura_penalty(h, rel.view(), t, DuraVariant::Literal),
            dura_gradient(&h, v, &t, DuraVariant::Literal),
        ),
        check(
            &|h, rel, t| dura_penalty(h, rel.view(), t, DuraVariant::Exact),
            dura_gradient(&h, v, &t, DuraVariant::Exact),
        ),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Largest finite-difference error of the full batch loss, perturbing every
/// parameter of the table.
fn batch_gradient_error(r: &mut impl Rng, ne: usize, n: usize, reg: &RegConfig) -> f64 {
    let nr = 2;
    let table = random_table(r, ne, nr, n, ModelKind::Star, 0.5);
    let batch = random_triples(r, 3, ne, nr);
    let weights = QueryWeights {
        tail: (0..ne).map(|_| r.random_range(0.3..1.0)).collect(),
        head: (0..ne).map(|_| r.random_range(0.3..1.0)).collect(),
    };
    let grads = batch_loss(&batch, &table, &weights, reg).unwrap().grads;
    let params = [
        table.entities().to_owned(),
        table.relation_complex().to_owned(),
        table.relation_translation().to_owned(),
    ];
    let analytic = [&grads.entities, &grads.rel_complex, &grads.rel_translation];
    let mut worst = 0.0f64;
    for which in 0..3 {
        for (idx, &g) in analytic[which].indexed_iter() {
            let loss_at = |x: &[f64]| {
                let mut p = params.clone();
                p[which][idx] = x[0];
                let [e, rc, tau] = p;
                let t = EmbeddingTable::from_parts(e, rc, tau, ModelKind::Star).unwrap();
                batch_loss(&batch, &t, &weights, reg).unwrap().loss
            };
            let numeric = central_difference(loss_at, &[params[which][idx]], 0, FD_STEP);
            worst = worst.max(gradient_error(g, numeric));
        }
    }
    worst
}

#[test]
fn criterion_2_gradient_fidelity() {
    let start = Instant::now();
    let mut r = rng(2);
    let regs = [
        RegConfig::none(),
        RegConfig::fro(0.1),
        RegConfig::dura(0.1, DuraVariant::Literal),
        RegConfig::dura(0.1, DuraVariant::Exact),
    ];
    let mut worst = 0.0f64;
    for config in 0..100 {
        let n = [2, 4, 6, 8][config % 4];
        let ne = r.random_range(2..=6);
        worst = worst.max(triple_gradient_error(&mut r, n));
        worst = worst.max(batch_gradient_error(&mut r, ne, n, &regs[config % regs.len()]));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        "gradient fidelity",
        worst < FD_TOLERANCE && secs < 30.0,
        format!("max relative error {worst:.2e} over 100 configurations in {secs:.2}s"),
    );
}

#[test]
fn criterion_3_pattern_suite() {
    let start = Instant::now();
    let config = VerifyConfig {
        n: 8,
        seed: 0,
        trials: 100,
    };
    let results = verify_suite(&StarKernel, &config).unwrap();
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.name.as_str())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        3,
        "pattern suite",
        failed.is_empty() && secs < 10.0,
        format!("{} checks, failed {failed:?}, {secs:.2}s", results.len()),
    );
}

#[test]
fn criterion_4_imbalance_statistics() {
    let mut details = Vec::new();
    let mut ok = true;

    let toy = |lines: &[(u32, u32, u32)], ne: usize| {
        let triples = lines
            .iter()
            .map(|&(h, r, t)| star_kge::data::Triple::new(h, r, t))
            .collect();
        store(ne, 2, triples, vec![], vec![])
    };
    let left = pair_imbalance(&count_two_paths(&toy(&[(0, 0, 1), (1, 1, 2)], 3)), 0, 1).unwrap();
    let right = pair_imbalance(
        &count_two_paths(&toy(&[(0, 0, 1), (1, 1, 2), (3, 1, 0), (2, 0, 4)], 5)),
        0,
        1,
    )
    .unwrap();
    ok &= left == 1.0 && right == 1.0 / 3.0;
    details.push(format!("toy pairs psi {left} and {right:.6}"));

    for (name, lo, hi) in [("WN18RR", 0.0, 0.013), ("FB15K237", 0.75, 0.85)] {
        let start = Instant::now();
        let s = TripleStore::load_triples(&dataset(name).join("train.txt"), None).unwrap();
        let report = analyze(&s, CountPolicy::benchmark()).unwrap();
        let chains = analyze(&s, CountPolicy::default()).unwrap();
        let secs = start.elapsed().as_secs_f64();
        ok &= (lo..=hi).contains(&report.psi) && secs < 120.0;
        details.push(format!(
            "{name} Psi {:.4} in [{lo}, {hi}] ({secs:.1}s; all-chains policy gives {:.4})",
            report.psi, chains.psi
        ));
    }
    verdict(4, "imbalance statistics", ok, details.join("; "));
}

#[test]
fn criterion_5_path_count_brute_force() {
    let mut mismatches = 0;
    for seed in 0..50u64 {
        let mut r = rng(1000 + seed);
        let ne = r.random_range(2..=80);
        let nr = r.random_range(1..=10);
        let count = r.random_range(1..=1000);
        let s = store(ne, nr, random_triples(&mut r, count, ne, nr), vec![], vec![]);
        let counts = count_two_paths(&s);
        let mut joined = vec![0u64; nr * nr];
        for a in s.train() {
            for b in s.train() {
                if a.tail == b.head {
                    joined[a.relation as usize * nr + b.relation as usize] += 1;
                }
            }
        }
        for i in 0..nr {
            for j in 0..nr {
                if counts.get(i, j) != joined[i * nr + j] {
                    mismatches += 1;
                }
            }
        }
    }
    verdict(
        5,
        "path-count brute force",
        mismatches == 0,
        format!("50 graphs, {mismatches} mismatching cells"),
    );
}

#[test]
fn criterion_6_behavioral_separation() {
    let start = Instant::now();
    let out = generate(&family_spec(10, 4, 0)).unwrap();
    let s = &out.store;
    let options = EvalOptions::default();
    let mut mean = [(0.0, 0.0); 2];
    for (k, kind) in [ModelKind::Star, ModelKind::ComplEx].into_iter().enumerate() {
        for seed in 0..5u64 {
            let config = TrainConfig {
                model_kind: kind,
                dim: 8,
                lr: 0.1,
                batch_size: 50,
                epochs: 200,
                w0: 0.0,
                reg: RegConfig::none(),
                seed,
                eval_every: 0,
                init_scale: 0.1,
                ..TrainConfig::default()
            };
            let table = train(s, &config).unwrap().table;
            let test = evaluate(Split::Test, &table, s, None, &options).unwrap();
            let od = evaluate_triples("test", &out.order_discriminating, &table, s, None, &options).unwrap();
            mean[k].0 += test.mrr / 5.0;
            mean[k].1 += od.mrr / 5.0;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let [(star_test, star_od), (cx_test, cx_od)] = mean;
    verdict(
        6,
        "behavioral separation",
        star_test >= 0.9 && cx_od < star_od && secs < 300.0,
        format!(
            "{} entities, {} order-discriminating test triples; STaR test {star_test:.3} od {star_od:.3}; \
             ComplEx test {cx_test:.3} od {cx_od:.3}; {secs:.1}s",
            s.num_entities(),
            out.order_discriminating.len()
        ),
    );
}

#[test]
#[ignore = "trains six WN18RR models; takes over two hours"]
fn criterion_7_small_dim_ordering() {
    let start = Instant::now();
    let paths = star_kge::data::DatasetPaths::from_dir(&dataset("WN18RR"));
    let s = TripleStore::load(&paths, None).unwrap();
    let mut mean = [0.0; 2];
    let mut runs = Vec::new();
    for (k, kind) in [ModelKind::Star, ModelKind::ComplEx].into_iter().enumerate() {
        for seed in 0..3u64 {
            let config = TrainConfig {
                model_kind: kind,
                dim: 32,
                lr: 0.5,
                batch_size: 1000,
                epochs: 6,
                reg: RegConfig::dura(0.05, DuraVariant::Literal),
                seed,
                eval_every: 2,
                ..TrainConfig::default()
            };
            let outcome = train(&s, &config).unwrap();
            let mrr = outcome.best_valid_mrr.unwrap();
            runs.push(format!("{kind}/{seed} {mrr:.4}"));
            mean[k] += mrr / 3.0;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        7,
        "small-dim WN18RR ordering",
        mean[0] >= mean[1] - 0.005,
        format!(
            "mean valid MRR STaR {:.4} vs ComplEx {:.4} ({}); {:.0}s",
            mean[0],
            mean[1],
            runs.join(", "),
            secs
        ),
    );
}

#[test]
fn criterion_8_evaluation_correctness() {
    let mut mismatches = 0;
    let mut invariant_failures = 0;
    let mut queries = 0;
    for seed in 0..50u64 {
        let mut r = rng(seed);
        let ne = r.random_range(2..=20);
        let nr = r.random_range(1..=3);
        let s = store(
            ne,
            nr,
            random_triples(&mut r, 3 * ne, ne, nr),
            random_triples(&mut r, ne, ne, nr),
            random_triples(&mut r, ne, ne, nr),
        );
        // Coarse parameters make exact ties common.
        let mut draw = |rows: usize| {
            ndarray::Array2::from_shape_simple_fn((rows, 2), || r.random_range(-2i32..=2) as f64 * 0.5)
        };
        let (e, rc, tau) = (draw(ne), draw(2 * nr), draw(2 * nr));
        let table = EmbeddingTable::from_parts(e, rc, tau, ModelKind::Star).unwrap();
        for rule in [TieRule::Pessimistic, TieRule::Random] {
            let options = EvalOptions {
                tie_rule: rule,
                direction: Direction::Both,
                seed,
            };
            let qs = queries_for(s.split(Split::Test), nr, Direction::Both);
            let ranks = rank_queries(&qs, &table, s.filter(), &options).unwrap();
            for (i, (q, &rank)) in qs.iter().zip(&ranks).enumerate() {
                queries += 1;
                let known = s.filter().known(q.head, q.relation);
                let mut scored: Vec<(f64, u32)> = (0..ne as u32)
                    .filter(|e| *e == q.answer || !known.contains(e))
                    .map(|e| (table.score(q.head as usize, q.relation as usize, e as usize).unwrap(), e))
                    .collect();
                scored.sort_by(|a, b| b.0.total_cmp(&a.0));
                let target = scored.iter().find(|(_, e)| *e == q.answer).unwrap().0;
                let first = scored.iter().position(|(v, _)| *v == target).unwrap();
                let ties = scored.iter().filter(|(v, _)| *v == target).count() - 1;
                let offset = match rule {
                    TieRule::Pessimistic => ties,
                    TieRule::Random => {
                        let mut g = ChaCha8Rng::seed_from_u64(seed);
                        g.set_stream(i as u64);
                        g.random_range(0..=ties)
                    }
                };
                if rank != first + offset + 1 {
                    mismatches += 1;
                }
            }
            let report = evaluate(Split::Test, &table, &s, None, &options).unwrap();
            if report.check_invariants().is_err() {
                invariant_failures += 1;
            }
        }
    }
    verdict(
        8,
        "evaluation correctness",
        mismatches == 0 && invariant_failures == 0,
        format!("{queries} ranked queries, {mismatches} mismatches, {invariant_failures} invariant failures"),
    );
}

#[test]
fn criterion_9_determinism() {
    let root = tempfile::tempdir().unwrap();
    let spec = family_spec(10, 4, 0);
    let data = root.path().join("data");
    generate(&spec).unwrap().write(&spec, &data).unwrap();
    let cfg = root.path().join("run.toml");
    std::fs::write(
        &cfg,
        "model_kind = \"star\"\ndim = 8\nepochs = 20\nbatch_size = 50\neval_every = 5\n\
         seed = 3\nout_dir = \"out\"\n[data]\ndir = \"data\"\n[reg]\nkind = \"dura\"\nlambda = 0.01\n",
    )
    .unwrap();
    // Same config file both times; the first run's output is moved aside.
    let run = |keep: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_star"))
            .args(["train", "--config", cfg.to_str().unwrap(), "--threads", "1"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let kept = root.path().join(keep);
        std::fs::rename(root.path().join("out"), &kept).unwrap();
        kept
    };
    let (a, b) = (run("a"), run("b"));
    let files = ["model.ckpt", "model.ckpt.json", "valid_report.json", "test_report.json"];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .collect();
    verdict(
        9,
        "determinism",
        differing.is_empty(),
        format!("compared {files:?}, differing {differing:?}"),
    );
}
