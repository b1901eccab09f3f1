//! Synthetic knowledge graphs with known relational structure.
//!
//! A spec declares base relations through generator rules and derived
//! relations through composition rules `r3 = r1 ∘ r2`, meaning
//! `(x, r1, y) ∧ (y, r2, z) ⇒ (x, r3, z)`. Base facts go to train; a fraction
//! of every derived relation is held out and split between valid and test.
//!
//! ```toml
//! num_entities = 220
//! seed = 7
//! holdout_fraction = 0.2
//!
//! [family]
//! couples = 10
//! generations = 4
//! children_min = 2
//! children_max = 2
//! spouse_relation = "has_wife"
//! child_relation = "has_child"
//!
//! [[relations]]
//! name = "likes"
//! rule = "symmetric"
//! count = 30
//!
//! [[compositions]]
//! first = "has_wife"
//! second = "has_child"
//! name = "wife_child"
//! commutes = false
//! ```
//!
//! Rules: `bijection`, `functional`, `symmetric`, `anti_symmetric`
//! (each with `count`), `fan_in` (with `count` tails and `heads_per_tail`)
//! and `inverse` (with `of`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use toml::Table;

use crate::config::Fields;
use crate::data::{Split, Triple, TripleStore, Vocab};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RelationRule {
    /// `count` heads mapped injectively onto `count` tails.
    Bijection { count: usize },
    /// `count` heads, each with one random tail.
    Functional { count: usize },
    /// `count` unordered pairs emitted in both directions.
    Symmetric { count: usize },
    /// `count` edges, never in both directions.
    AntiSymmetric { count: usize },
    /// `count` tails, each with `heads_per_tail` distinct heads used nowhere else.
    FanIn { count: usize, heads_per_tail: usize },
    /// The reverse of another relation.
    Inverse { of: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub name: String,
    #[serde(flatten)]
    pub rule: RelationRule,
}

/// Family trees in the spirit of a spouse / child example: married couples,
/// their children, and spouses married in from outside the tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub couples: usize,
    pub generations: usize,
    pub children_min: usize,
    pub children_max: usize,
    /// Husband → wife.
    pub spouse_relation: String,
    /// Parent → child.
    pub child_relation: String,
    /// Record each child under one randomly chosen parent instead of both,
    /// so a husband's own child edges do not already list his wife's
    /// children.
    #[serde(default)]
    pub one_parent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionRule {
    pub first: String,
    pub second: String,
    pub name: String,
    /// Whether `first ∘ second` equals `second ∘ first` on the generated data.
    pub commutes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_entities: usize,
    pub seed: u64,
    pub holdout_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub relations: Vec<RelationSpec>,
    #[serde(default)]
    pub compositions: Vec<CompositionRule>,
}

impl SynthSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SynthSpec::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("spec", e.message().to_owned()))?;
        let mut f = Fields::new(&mut root, "");
        let num_entities = f
            .uint("num_entities")?
            .ok_or_else(|| Error::config("num_entities", "missing"))?;
        let seed = f.uint("seed")?.unwrap_or(0) as u64;
        let holdout_fraction = f.float("holdout_fraction")?.unwrap_or(0.2);
        let family = f.table("family")?.map(parse_family).transpose()?;
        let relations = f
            .array("relations")?
            .unwrap_or_default()
            .into_iter()
            .map(|v| parse_entry(v, "relations", parse_relation))
            .collect::<Result<Vec<_>>>()?;
        let compositions = f
            .array("compositions")?
            .unwrap_or_default()
            .into_iter()
            .map(|v| parse_entry(v, "compositions", parse_composition))
            .collect::<Result<Vec<_>>>()?;
        f.finish()?;
        let spec = SynthSpec {
            num_entities,
            seed,
            holdout_fraction,
            family,
            relations,
            compositions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::config("holdout_fraction", "must lie in [0, 1)"));
        }
        if let Some(fam) = &self.family {
            if fam.children_min > fam.children_max {
                return Err(Error::config("family.children_min", "exceeds children_max"));
            }
            if fam.spouse_relation == fam.child_relation {
                return Err(Error::config("family.child_relation", "must differ from spouse_relation"));
            }
        }
        Ok(())
    }
}

fn parse_entry<T>(v: toml::Value, section: &'static str, f: fn(Table) -> Result<T>) -> Result<T> {
    match v {
        toml::Value::Table(t) => f(t),
        other => Err(Error::config(
            section,
            format!("expected a table, found {}", other.type_str()),
        )),
    }
}

fn need<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(field, "missing"))
}

fn parse_family(mut t: Table) -> Result<FamilySpec> {
    let mut f = Fields::new(&mut t, "family.");
    let couples = need(f.uint("couples")?, "family.couples")?;
    let generations = need(f.uint("generations")?, "family.generations")?;
    let children_min = f.uint("children_min")?.unwrap_or(2);
    let children_max = f.uint("children_max")?.unwrap_or(children_min);
    let spouse_relation = f.string("spouse_relation")?.unwrap_or_else(|| "has_wife".into());
    let child_relation = f.string("child_relation")?.unwrap_or_else(|| "has_child".into());
    let one_parent = f.boolean("one_parent")?.unwrap_or(false);
    f.finish()?;
    Ok(FamilySpec {
        couples,
        generations,
        children_min,
        children_max,
        spouse_relation,
        child_relation,
        one_parent,
    })
}

fn parse_relation(mut t: Table) -> Result<RelationSpec> {
    let mut f = Fields::new(&mut t, "relations.");
    let name = need(f.string("name")?, "relations.name")?;
    let rule_name = need(f.string("rule")?, "relations.rule")?;
    let count = f.uint("count")?;
    let heads_per_tail = f.uint("heads_per_tail")?;
    let of = f.string("of")?;
    f.finish()?;
    let count_of = || need(count, "relations.count");
    let rule = match rule_name.as_str() {
        "bijection" => RelationRule::Bijection { count: count_of()? },
        "functional" => RelationRule::Functional { count: count_of()? },
        "symmetric" => RelationRule::Symmetric { count: count_of()? },
        "anti_symmetric" => RelationRule::AntiSymmetric { count: count_of()? },
        "fan_in" => RelationRule::FanIn {
            count: count_of()?,
            heads_per_tail: need(heads_per_tail, "relations.heads_per_tail")?,
        },
        "inverse" => RelationRule::Inverse {
            of: need(of, "relations.of")?,
        },
        other => {
            return Err(Error::config(
                "relations.rule",
                format!("unknown rule '{other}'"),
            ))
        }
    };
    Ok(RelationSpec { name, rule })
}

fn parse_composition(mut t: Table) -> Result<CompositionRule> {
    let mut f = Fields::new(&mut t, "compositions.");
    let first = need(f.string("first")?, "compositions.first")?;
    let second = need(f.string("second")?, "compositions.second")?;
    let name = need(f.string("name")?, "compositions.name")?;
    let commutes = f.boolean("commutes")?.unwrap_or(false);
    f.finish()?;
    Ok(CompositionRule {
        first,
        second,
        name,
        commutes,
    })
}

/// A generated graph and the held-out test triples whose answer differs
/// between the two composition orders.
#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub store: TripleStore,
    pub order_discriminating: Vec<Triple>,
}

type Edges = BTreeSet<(u32, u32)>;

#[derive(Default)]
struct Builder {
    relations: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edges>,
    symmetric: BTreeSet<usize>,
    anti_symmetric: BTreeSet<usize>,
    functional: BTreeSet<usize>,
}

impl Builder {
    fn relation(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.relations.len();
        self.relations.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        self.edges.push(Edges::new());
        i
    }
}

fn sample_distinct(rng: &mut ChaCha8Rng, pool: usize, k: usize, what: &str) -> Result<Vec<u32>> {
    if k > pool {
        return Err(Error::Unsatisfiable(format!(
            "{what} needs {k} distinct entities, only {pool} exist"
        )));
    }
    Ok(rand::seq::index::sample(rng, pool, k)
        .into_iter()
        .map(|i| i as u32)
        .collect())
}

fn generate_family(fam: &FamilySpec, b: &mut Builder, rng: &mut ChaCha8Rng, pool: usize) -> Result<u32> {
    let spouse = b.relation(&fam.spouse_relation);
    let child = b.relation(&fam.child_relation);
    let mut next = 0u32;
    let mut fresh = || {
        let id = next;
        next += 1;
        id
    };
    // (husband, wife)
    let mut couples: Vec<(u32, u32)> = (0..fam.couples).map(|_| (fresh(), fresh())).collect();
    for generation in 0..fam.generations {
        for &(husband, wife) in &couples {
            b.edges[spouse].insert((husband, wife));
        }
        if generation + 1 == fam.generations {
            break;
        }
        let marry = generation + 2 < fam.generations;
        let mut next_couples = Vec::new();
        for &(husband, wife) in &couples {
            let kids = rng.random_range(fam.children_min..=fam.children_max);
            for _ in 0..kids {
                let kid = fresh();
                if !fam.one_parent || rng.random_bool(0.5) {
                    b.edges[child].insert((husband, kid));
                }
                if !fam.one_parent || !b.edges[child].contains(&(husband, kid)) {
                    b.edges[child].insert((wife, kid));
                }
                // Children below the last generation marry someone from
                // outside the tree.
                if marry {
                    let partner = fresh();
                    if rng.random_bool(0.5) {
                        next_couples.push((kid, partner));
                    } else {
                        next_couples.push((partner, kid));
                    }
                }
            }
        }
        couples = next_couples;
    }
    let used = next as usize;
    if used > pool {
        return Err(Error::Unsatisfiable(format!(
            "family needs {used} entities, num_entities is {pool}"
        )));
    }
    Ok(next)
}

fn generate_rule(
    rule: &RelationRule,
    rel: usize,
    b: &mut Builder,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<()> {
    let what = b.relations[rel].clone();
    match rule {
        RelationRule::Bijection { count } => {
            let heads = sample_distinct(rng, n, *count, &what)?;
            let mut tails = sample_distinct(rng, n, *count, &what)?;
            tails.shuffle(rng);
            b.edges[rel].extend(heads.into_iter().zip(tails));
            b.functional.insert(rel);
        }
        RelationRule::Functional { count } => {
            let heads = sample_distinct(rng, n, *count, &what)?;
            for h in heads {
                let t = rng.random_range(0..n as u32);
                b.edges[rel].insert((h, t));
            }
            b.functional.insert(rel);
        }
        RelationRule::Symmetric { count } => {
            if *count > n * n.saturating_sub(1) / 2 {
                return Err(Error::Unsatisfiable(format!("{what}: too many symmetric pairs")));
            }
            let mut added = 0;
            while added < *count {
                let pair = sample_distinct(rng, n, 2, &what)?;
                if b.edges[rel].insert((pair[0], pair[1])) {
                    b.edges[rel].insert((pair[1], pair[0]));
                    added += 1;
                }
            }
            b.symmetric.insert(rel);
        }
        RelationRule::AntiSymmetric { count } => {
            if *count > n * n.saturating_sub(1) / 2 {
                return Err(Error::Unsatisfiable(format!("{what}: too many edges")));
            }
            // Edges follow a random total order, so no edge is reversed.
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.shuffle(rng);
            let mut added = 0;
            while added < *count {
                let pair = sample_distinct(rng, n, 2, &what)?;
                let (lo, hi) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if b.edges[rel].insert((order[lo as usize], order[hi as usize])) {
                    added += 1;
                }
            }
            b.anti_symmetric.insert(rel);
        }
        RelationRule::FanIn {
            count,
            heads_per_tail,
        } => {
            let ids = sample_distinct(rng, n, count * (heads_per_tail + 1), &what)?;
            for group in ids.chunks(heads_per_tail + 1) {
                let tail = group[0];
                for &h in &group[1..] {
                    b.edges[rel].insert((h, tail));
                }
            }
        }
        RelationRule::Inverse { of } => {
            let src = *b.index.get(of).ok_or_else(|| {
                Error::config("relations.of", format!("unknown relation '{of}' (declare it earlier)"))
            })?;
            let mirrored: Vec<_> = b.edges[src].iter().map(|&(h, t)| (t, h)).collect();
            b.edges[rel].extend(mirrored);
        }
    }
    Ok(())
}

/// `{(x, z) : (x, y) ∈ a, (y, z) ∈ b}`.
pub fn compose(a: &Edges, b: &Edges) -> Edges {
    let mut by_head: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &(y, z) in b {
        by_head.entry(y).or_default().push(z);
    }
    let mut out = Edges::new();
    for &(x, y) in a {
        if let Some(zs) = by_head.get(&y) {
            out.extend(zs.iter().map(|&z| (x, z)));
        }
    }
    out
}

fn answers(edges: &Edges, head: u32) -> BTreeSet<u32> {
    edges.range((head, 0)..=(head, u32::MAX)).map(|&(_, t)| t).collect()
}

fn check_consistency(b: &Builder) -> Result<()> {
    for &r in &b.symmetric {
        if b.anti_symmetric.contains(&r) {
            return Err(Error::Unsatisfiable(format!(
                "relation '{}' is declared both symmetric and anti-symmetric",
                b.relations[r]
            )));
        }
        if let Some(&(h, t)) = b.edges[r].iter().find(|&&(h, t)| !b.edges[r].contains(&(t, h))) {
            return Err(Error::Unsatisfiable(format!(
                "symmetric relation '{}' has ({h}, {t}) without its reverse",
                b.relations[r]
            )));
        }
    }
    for &r in &b.anti_symmetric {
        if let Some(&(h, t)) = b.edges[r]
            .iter()
            .find(|&&(h, t)| h != t && b.edges[r].contains(&(t, h)))
        {
            return Err(Error::Unsatisfiable(format!(
                "anti-symmetric relation '{}' holds in both directions for ({h}, {t})",
                b.relations[r]
            )));
        }
    }
    for &r in &b.functional {
        let mut seen = BTreeSet::new();
        if let Some(&(h, _)) = b.edges[r].iter().find(|&&(h, _)| !seen.insert(h)) {
            return Err(Error::Unsatisfiable(format!(
                "functional relation '{}' has several tails for head {h}",
                b.relations[r]
            )));
        }
    }
    Ok(())
}

/// Generates the graph described by `spec`. Deterministic in `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = Builder::default();
    let n = spec.num_entities;
    if let Some(fam) = &spec.family {
        generate_family(fam, &mut b, &mut rng, n)?;
    }
    for r in &spec.relations {
        let rel = b.relation(&r.name);
        generate_rule(&r.rule, rel, &mut b, &mut rng, n)?;
    }
    check_consistency(&b)?;

    let base_count = b.relations.len();
    let mut derived = Vec::new();
    for c in &spec.compositions {
        let lookup = |name: &str| {
            b.index
                .get(name)
                .copied()
                .filter(|&i| i < base_count)
                .ok_or_else(|| Error::config("compositions", format!("unknown base relation '{name}'")))
        };
        let (r1, r2) = (lookup(&c.first)?, lookup(&c.second)?);
        if b.index.contains_key(&c.name) {
            return Err(Error::Unsatisfiable(format!(
                "composed relation '{}' clashes with an existing relation",
                c.name
            )));
        }
        let forward = compose(&b.edges[r1], &b.edges[r2]);
        let backward = compose(&b.edges[r2], &b.edges[r1]);
        if c.commutes && forward != backward {
            return Err(Error::Unsatisfiable(format!(
                "'{}' is declared commuting but {} ∘ {} differs from {} ∘ {}",
                c.name, c.first, c.second, c.second, c.first
            )));
        }
        if forward.is_empty() {
            return Err(Error::Unsatisfiable(format!("'{}' has no instances", c.name)));
        }
        let rel = b.relation(&c.name);
        b.edges[rel] = forward;
        derived.push((rel, backward, c.commutes));
    }

    let mut train = Vec::new();
    let (mut valid, mut test) = (Vec::new(), Vec::new());
    for r in 0..base_count {
        train.extend(b.edges[r].iter().map(|&(h, t)| Triple::new(h, r as u32, t)));
    }
    let mut order_discriminating = Vec::new();
    for (rel, backward, commutes) in &derived {
        let mut facts: Vec<(u32, u32)> = b.edges[*rel].iter().copied().collect();
        facts.shuffle(&mut rng);
        let held = (facts.len() as f64 * spec.holdout_fraction).round() as usize;
        let (held_out, kept) = facts.split_at(held);
        let n_valid = held / 2;
        let r = *rel as u32;
        train.extend(kept.iter().map(|&(h, t)| Triple::new(h, r, t)));
        valid.extend(held_out[..n_valid].iter().map(|&(h, t)| Triple::new(h, r, t)));
        for &(h, t) in &held_out[n_valid..] {
            let triple = Triple::new(h, r, t);
            test.push(triple);
            if !commutes {
                let other = answers(backward, h);
                if !other.is_empty() && other.is_disjoint(&answers(&b.edges[*rel], h)) {
                    order_discriminating.push(triple);
                }
            }
        }
    }

    let entity_names = (0..n).map(|i| format!("e{i}")).collect();
    let vocab = Vocab::from_names(entity_names, b.relations.clone())?;
    let store = TripleStore::from_splits(vocab, train, valid, test)?;
    Ok(SynthOutput {
        store,
        order_discriminating,
    })
}

impl SynthOutput {
    /// Writes the three splits, the order-discriminating queries and the spec.
    pub fn write(&self, spec: &SynthSpec, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for split in [Split::Train, Split::Valid, Split::Test] {
            self.store.write_split(split, &dir.join(split.file_name()))?;
        }
        crate::data::write_triples(
            &dir.join("order_discriminating.txt"),
            self.store.vocab(),
            &self.order_discriminating,
        )?;
        let path = dir.join("spec.json");
        let json = serde_json::to_string_pretty(spec)?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }
}

/// A family graph with the two spouse/child composition orders, sized to
/// `couples` founding couples over `generations` generations.
pub fn family_spec(couples: usize, generations: usize, seed: u64) -> SynthSpec {
    let mut persons = 2 * couples;
    let mut current = couples;
    for g in 1..generations {
        let kids = current * 2;
        persons += if g + 1 < generations { 2 * kids } else { kids };
        current = kids;
    }
    SynthSpec {
        num_entities: persons,
        seed,
        holdout_fraction: 0.2,
        family: Some(FamilySpec {
            couples,
            generations,
            children_min: 2,
            children_max: 2,
            spouse_relation: "has_wife".into(),
            child_relation: "has_child".into(),
            one_parent: false,
        }),
        relations: vec![],
        compositions: vec![
            CompositionRule {
                first: "has_wife".into(),
                second: "has_child".into(),
                name: "wife_child".into(),
                commutes: false,
            },
            CompositionRule {
                first: "has_child".into(),
                second: "has_wife".into(),
                name: "child_wife".into(),
                commutes: false,
            },
        ],
    }
}
