//! `star`: train, evaluate, analyze, verify and synthesize.
//!
//! Exit codes: 0 success, 1 check or metric failure, 2 usage or config error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use star_kge::analysis::{self, ArcFormat, CountPolicy, DiagonalPolicy, PathUnit};
use star_kge::checkpoint::{self, config_hash};
use star_kge::config::RunConfig;
use star_kge::data::{classify_relations, DatasetPaths, Split, TripleStore, Vocab, MANIFEST_FILE};
use star_kge::eval::{evaluate, EvalOptions, EvalReport, TieRule, HITS_AT};
use star_kge::patterns::{verify_suite, VerifyConfig};
use star_kge::model::StarKernel;
use star_kge::synth::{generate, SynthSpec};
use star_kge::training::{train_with, EpochLog};
use star_kge::{Error, Result};

#[derive(Parser)]
#[command(name = "star", version, about = "STaR knowledge graph embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a TOML run config.
    Train(TrainArgs),
    /// Evaluate a checkpoint with filtered ranking.
    Eval(EvalArgs),
    /// Two-path imbalance statistics of a train file.
    Analyze(AnalyzeArgs),
    /// Run the relation-pattern and kernel checks.
    Verify(VerifyArgs),
    /// Generate a synthetic knowledge graph.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Train this many runs with consecutive seeds and report mean ± std.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Worker threads; 1 gives fully deterministic runs.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Pessimistic,
    Random,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Run config naming the data (and the expected dimension).
    #[arg(long, conflicts_with = "data_dir")]
    config: Option<PathBuf>,
    /// Directory with train.txt / valid.txt / test.txt.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Directory holding entities.dict / relations.dict; defaults to the
    /// checkpoint's directory or its parent.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long, value_enum, default_value = "pessimistic")]
    tie: TieArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV with one row per relation: name, proportion, MRR.
    #[arg(long)]
    per_relation: Option<PathBuf>,
    /// CSV with one row per complexity class.
    #[arg(long)]
    per_class: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Chains,
    Middle,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiagonalArg {
    Both,
    Single,
    Exclude,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Drop paths that revisit an entity.
    #[arg(long)]
    exclude_degenerate: bool,
    #[arg(long, value_enum, default_value = "chains")]
    unit: UnitArg,
    #[arg(long, value_enum, default_value = "both")]
    diagonal: DiagonalArg,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Also write the results as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config {
                field: "threads".into(),
                message: "must be at least 1".into(),
            });
        }
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    fs::write(path, json + "\n").map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn print_report(report: &EvalReport) {
    let hits: Vec<String> = HITS_AT
        .iter()
        .map(|k| format!("hits@{k} {:.4}", report.hits_at(*k)))
        .collect();
    println!(
        "{}: mrr {:.4}, {} ({} queries)",
        report.split,
        report.mrr,
        hits.join(", "),
        report.queries
    );
}

#[derive(Serialize)]
struct Stat {
    mean: f64,
    std: f64,
    values: Vec<f64>,
}

impl Stat {
    fn of(values: Vec<f64>) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Stat {
            mean,
            std: var.sqrt(),
            values,
        }
    }
}

fn metric_values(report: &EvalReport) -> Vec<(String, f64)> {
    let mut out = vec![("mrr".to_owned(), report.mrr)];
    out.extend(HITS_AT.iter().map(|k| (format!("hits@{k}"), report.hits_at(*k))));
    out
}

fn train_once(config: &RunConfig, store: &TripleStore, dir: &Path, seed: u64) -> Result<Vec<EvalReport>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut train_config = config.train.clone();
    train_config.seed = seed;
    let hash = config_hash(&(config, seed))?;
    let log_path = dir.join("train_log.jsonl");
    let mut log_file = fs::File::create(&log_path).map_err(io_err(&log_path))?;
    let mut log_error = None;
    let outcome = train_with(store, &train_config, |entry: &EpochLog| {
        let line = serde_json::to_string(entry).expect("log entry serializes");
        if let Err(e) = writeln!(log_file, "{line}") {
            log_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_error {
        return Err(io_err(&log_path)(e));
    }
    checkpoint::save(&dir.join("model.ckpt"), &outcome.table, &hash, outcome.epoch)?;
    let classes = classify_relations(store).ok();
    let options = EvalOptions {
        tie_rule: config.tie_rule,
        seed,
        ..EvalOptions::default()
    };
    let mut reports = Vec::new();
    for split in [Split::Valid, Split::Test] {
        if store.split(split).is_empty() {
            continue;
        }
        let report = evaluate(split, &outcome.table, store, classes.as_ref(), &options)?;
        report.write_json(&dir.join(format!("{}_report.json", split.name())))?;
        print_report(&report);
        reports.push(report);
    }
    Ok(reports)
}

fn cmd_train(args: TrainArgs) -> Result<bool> {
    let mut config = RunConfig::from_file(&args.config)?;
    if args.threads.is_some() {
        config.threads = args.threads;
    }
    if args.repeats == 0 {
        return Err(Error::Config {
            field: "repeats".into(),
            message: "must be at least 1".into(),
        });
    }
    config.write_manifest()?;
    set_threads(config.threads)?;
    let store = TripleStore::load(&config.data, None)?;
    store.save(&config.out_dir)?;
    let base_seed = config.train.seed;
    if args.repeats == 1 {
        train_once(&config, &store, &config.out_dir, base_seed)?;
        return Ok(true);
    }
    let mut collected: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for i in 0..args.repeats {
        let seed = base_seed + i as u64;
        println!("run {} of {} (seed {seed})", i + 1, args.repeats);
        let dir = config.out_dir.join(format!("run_{i}"));
        for report in train_once(&config, &store, &dir, seed)? {
            let split = collected.entry(report.split.clone()).or_default();
            for (name, value) in metric_values(&report) {
                split.entry(name).or_default().push(value);
            }
        }
    }
    let summary: BTreeMap<String, BTreeMap<String, Stat>> = collected
        .into_iter()
        .map(|(split, metrics)| {
            let stats = metrics.into_iter().map(|(k, v)| (k, Stat::of(v))).collect();
            (split, stats)
        })
        .collect();
    for (split, metrics) in &summary {
        for (name, stat) in metrics {
            println!("{split} {name}: {:.4} ± {:.4}", stat.mean, stat.std);
        }
    }
    write_json(
        &config.out_dir.join("summary.json"),
        &serde_json::json!({ "repeats": args.repeats, "splits": summary }),
    )?;
    Ok(true)
}

fn find_vocab(explicit: Option<&Path>, checkpoint: &Path) -> Option<PathBuf> {
    if let Some(dir) = explicit {
        return Some(dir.to_owned());
    }
    let parent = checkpoint.parent()?;
    [Some(parent), parent.parent()]
        .into_iter()
        .flatten()
        .find(|dir| dir.join("entities.dict").exists() && dir.join("relations.dict").exists())
        .map(Path::to_owned)
}

fn cmd_eval(args: EvalArgs) -> Result<bool> {
    set_threads(args.threads)?;
    let table = checkpoint::load(&args.checkpoint)?;
    let (paths, expected_dim) = match (&args.config, &args.data_dir) {
        (Some(cfg), _) => {
            let config = RunConfig::from_file(cfg)?;
            (config.data, Some(config.train.dim))
        }
        (None, Some(dir)) => (DatasetPaths::from_dir(dir), None),
        (None, None) => {
            return Err(Error::Config {
                field: "data".into(),
                message: "pass --config or --data-dir".into(),
            })
        }
    };
    if let Some(dim) = expected_dim {
        if dim != table.dim() {
            return Err(Error::Mismatch(format!(
                "checkpoint has dimension {}, config expects {dim}",
                table.dim()
            )));
        }
    }
    let vocab = match find_vocab(args.vocab.as_deref(), &args.checkpoint) {
        Some(dir) => Some(Vocab::load(&dir)?),
        None => {
            log::warn!("no vocabulary next to the checkpoint; rebuilding from the data files");
            None
        }
    };
    let store = TripleStore::load(&paths, vocab)?;
    let classes = classify_relations(&store).ok();
    let options = EvalOptions {
        tie_rule: match args.tie {
            TieArg::Pessimistic => TieRule::Pessimistic,
            TieArg::Random => TieRule::Random,
        },
        seed: args.seed,
        ..EvalOptions::default()
    };
    let report = evaluate(args.split.into(), &table, &store, classes.as_ref(), &options)?;
    print_report(&report);
    if let Some(path) = &args.out {
        report.write_json(path)?;
    }
    if let Some(path) = &args.per_relation {
        report.write_relation_csv(path)?;
    }
    if let Some(path) = &args.per_class {
        report.write_class_csv(path)?;
        for (class, m) in &report.per_class {
            println!("  {}: mrr {:.4} ({} queries)", class.label(), m.mrr, m.count);
        }
    }
    if let Err(violation) = report.check_invariants() {
        eprintln!("report invariant violated: {violation}");
        return Ok(false);
    }
    Ok(true)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<bool> {
    set_threads(args.threads)?;
    let store = TripleStore::load_triples(&args.train, None)?;
    let policy = CountPolicy {
        unit: match args.unit {
            UnitArg::Chains => PathUnit::Chains,
            UnitArg::Middle => PathUnit::MiddleEntities,
        },
        exclude_degenerate: args.exclude_degenerate,
        diagonal: match args.diagonal {
            DiagonalArg::Both => DiagonalPolicy::Both,
            DiagonalArg::Single => DiagonalPolicy::Single,
            DiagonalArg::Exclude => DiagonalPolicy::Exclude,
        },
    };
    let report = analysis::analyze(&store, policy)?;
    report.write_json(&args.out)?;
    if let Some(path) = &args.svg {
        analysis::export_arc_data(&report, path, ArcFormat::Svg)?;
    }
    if let Some(path) = &args.csv {
        analysis::export_arc_data(&report, path, ArcFormat::Csv)?;
    }
    println!(
        "Psi = {:.4} ({} both / {} single paths; {} both / {} single pairs; {policy})",
        report.psi, report.triple_both, report.triple_single, report.both_pairs, report.single_pairs
    );
    Ok(true)
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let config = VerifyConfig {
        n: args.n,
        seed: args.seed,
        trials: args.trials,
    };
    let results = verify_suite(&StarKernel, &config)?;
    let width = results.iter().map(|r| r.name.chars().count()).max().unwrap_or(0);
    for r in &results {
        let pad = width - r.name.chars().count();
        let residual = r
            .residual()
            .map(|v| format!("{v:.2e}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<6} {}{} residual {:>9}  {}",
            format!("{:?}", r.outcome).to_uppercase(),
            r.name,
            " ".repeat(pad),
            residual,
            r.detail
        );
    }
    if let Some(path) = &args.json {
        write_json(path, &results)?;
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{} checks, {failed} failed", results.len());
    Ok(failed == 0)
}

fn cmd_synth(args: SynthArgs) -> Result<bool> {
    let spec = SynthSpec::from_file(&args.spec)?;
    let out = generate(&spec)?;
    out.write(&spec, &args.out)?;
    let manifest = out.store.manifest();
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    println!(
        "{} entities, {} relations, {} / {} / {} triples, {} order-discriminating test triples",
        manifest.num_entities,
        manifest.num_relations,
        manifest.train,
        manifest.valid,
        manifest.test,
        out.order_discriminating.len()
    );
    Ok(true)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
