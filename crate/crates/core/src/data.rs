//! Triple ingestion, vocabularies, filter indexes and relation statistics.
//!
//! Triples are read from the usual three-column TSV layout
//! (`head \t relation \t tail`). Entity and relation names are interned into
//! dense 0-based ids. Reciprocal relations are never stored: the reciprocal
//! of relation `r` is addressed as `r + |R|` and only appears in the filter
//! index and in the training/evaluation query streams.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold separating "1" from "N" in the tphr/hptr classification.
pub const COMPLEXITY_THRESHOLD: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }

    /// The mirrored triple `(t, r + |R|, h)`.
    pub fn reciprocal(&self, num_relations: usize) -> Triple {
        Triple {
            head: self.tail,
            relation: self.relation + num_relations as u32,
            tail: self.head,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocab {
    entities: Vec<String>,
    relations: Vec<String>,
    entity_index: HashMap<String, u32>,
    relation_index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names(entities: Vec<String>, relations: Vec<String>) -> Result<Self> {
        let mut vocab = Vocab::new();
        for name in entities {
            if vocab.entity_index.contains_key(&name) {
                return Err(Error::Undefined(format!("duplicate entity name '{name}'")));
            }
            vocab.intern_entity(&name);
        }
        for name in relations {
            if vocab.relation_index.contains_key(&name) {
                return Err(Error::Undefined(format!("duplicate relation name '{name}'")));
            }
            vocab.intern_relation(&name);
        }
        Ok(vocab)
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    /// Number of original (non-reciprocal) relations.
    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, name: &str) -> Option<u32> {
        self.entity_index.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<u32> {
        self.relation_index.get(name).copied()
    }

    pub fn entity_name(&self, id: u32) -> &str {
        &self.entities[id as usize]
    }

    /// Name of an original relation. Reciprocal ids map to their base relation.
    pub fn relation_name(&self, id: u32) -> &str {
        &self.relations[id as usize % self.relations.len()]
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations
    }

    pub fn intern_entity(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.entity_index.get(name) {
            return id;
        }
        let id = self.entities.len() as u32;
        self.entities.push(name.to_owned());
        self.entity_index.insert(name.to_owned(), id);
        id
    }

    pub fn intern_relation(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.relation_index.get(name) {
            return id;
        }
        let id = self.relations.len() as u32;
        self.relations.push(name.to_owned());
        self.relation_index.insert(name.to_owned(), id);
        id
    }

    /// Writes `entities.dict` and `relations.dict` (`id \t name` per line).
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_dict(&dir.join(ENTITY_DICT), &self.entities)?;
        write_dict(&dir.join(RELATION_DICT), &self.relations)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let entities = read_dict(&dir.join(ENTITY_DICT))?;
        let relations = read_dict(&dir.join(RELATION_DICT))?;
        Vocab::from_names(entities, relations)
    }
}

pub const ENTITY_DICT: &str = "entities.dict";
pub const RELATION_DICT: &str = "relations.dict";

fn write_dict(path: &Path, names: &[String]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (id, name) in names.iter().enumerate() {
        writeln!(out, "{id}\t{name}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_dict(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut names = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            message,
        };
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `id \\t name`".into()))?;
        let id: usize = id
            .parse()
            .map_err(|_| parse_err(format!("bad id '{id}'")))?;
        if id != names.len() {
            return Err(parse_err(format!("ids must be dense, expected {}", names.len())));
        }
        names.push(name.to_owned());
    }
    Ok(names)
}

/// Whether reading a file may add new names to the vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VocabMode {
    Extend,
    Frozen,
}

/// Reads a TSV triple file in file order, duplicates included.
pub fn read_triples(path: &Path, vocab: &mut Vocab, mode: VocabMode) -> Result<Vec<Triple>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut triples = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                message: "invalid UTF-8".into(),
            },
            _ => Error::io(path, e),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                message: format!(
                    "expected 3 non-empty tab-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        let lookup = |vocab: &mut Vocab, kind: &'static str, name: &str| -> Result<u32> {
            let found = match kind {
                "entity" => vocab.entity_id(name),
                _ => vocab.relation_id(name),
            };
            match (found, mode) {
                (Some(id), _) => Ok(id),
                (None, VocabMode::Extend) => Ok(match kind {
                    "entity" => vocab.intern_entity(name),
                    _ => vocab.intern_relation(name),
                }),
                (None, VocabMode::Frozen) => Err(Error::UnknownSymbol {
                    path: path.to_owned(),
                    line: lineno + 1,
                    kind,
                    name: name.to_owned(),
                }),
            }
        };
        let head = lookup(vocab, "entity", fields[0])?;
        let relation = lookup(vocab, "relation", fields[1])?;
        let tail = lookup(vocab, "entity", fields[2])?;
        triples.push(Triple::new(head, relation, tail));
    }
    Ok(triples)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.txt",
            Split::Valid => "valid.txt",
            Split::Test => "test.txt",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::config("split", format!("unknown split '{other}'"))),
        }
    }
}

/// Locations of the three split files. `valid` and `test` are optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub train: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
}

impl DatasetPaths {
    /// `train.txt`, `valid.txt` and `test.txt` inside `dir`; missing optional
    /// splits are left out.
    pub fn from_dir(dir: &Path) -> Self {
        let opt = |split: Split| {
            let p = dir.join(split.file_name());
            p.exists().then_some(p)
        };
        DatasetPaths {
            train: dir.join(Split::Train.file_name()),
            valid: opt(Split::Valid),
            test: opt(Split::Test),
        }
    }
}

/// Known-true answers per `(head, relation)` over every split, reciprocals
/// included.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilterIndex {
    answers: HashMap<(u32, u32), Vec<u32>>,
}

impl FilterIndex {
    pub fn build<'a>(triples: impl IntoIterator<Item = &'a Triple>, num_relations: usize) -> Self {
        let mut answers: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for t in triples {
            answers.entry((t.head, t.relation)).or_default().push(t.tail);
            let r = t.reciprocal(num_relations);
            answers.entry((r.head, r.relation)).or_default().push(r.tail);
        }
        for tails in answers.values_mut() {
            tails.sort_unstable();
            tails.dedup();
        }
        FilterIndex { answers }
    }

    /// Sorted, deduplicated known answers for the query `(head, relation, ?)`.
    pub fn known(&self, head: u32, relation: u32) -> &[u32] {
        self.answers
            .get(&(head, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.known(triple.head, triple.relation)
            .binary_search(&triple.tail)
            .is_ok()
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub num_entities: usize,
    pub num_relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub duplicates_dropped: usize,
    pub entities_absent_from_train: usize,
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug)]
pub struct TripleStore {
    vocab: Vocab,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    filter: FilterIndex,
    duplicates_dropped: usize,
}

impl TripleStore {
    /// Builds a store from already-encoded splits. Duplicate triples within a
    /// split are dropped (first occurrence kept) and counted.
    pub fn from_splits(
        vocab: Vocab,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        let (ne, nr) = (vocab.num_entities(), vocab.num_relations());
        for t in train.iter().chain(&valid).chain(&test) {
            check_id("entity", t.head as usize, ne)?;
            check_id("entity", t.tail as usize, ne)?;
            check_id("relation", t.relation as usize, nr)?;
        }
        let mut duplicates_dropped = 0;
        let mut dedup = |split: Vec<Triple>| {
            let mut seen = HashSet::with_capacity(split.len());
            let before = split.len();
            let kept: Vec<Triple> = split.into_iter().filter(|t| seen.insert(*t)).collect();
            duplicates_dropped += before - kept.len();
            kept
        };
        let train = dedup(train);
        let valid = dedup(valid);
        let test = dedup(test);
        if duplicates_dropped > 0 {
            log::warn!("dropped {duplicates_dropped} duplicate triples");
        }
        let filter = FilterIndex::build(train.iter().chain(&valid).chain(&test), nr);
        Ok(TripleStore {
            vocab,
            train,
            valid,
            test,
            filter,
            duplicates_dropped,
        })
    }

    /// Loads all splits. Without a vocabulary one is built over
    /// train ∪ valid ∪ test; with one, unknown names are an error.
    pub fn load(paths: &DatasetPaths, vocab: Option<Vocab>) -> Result<Self> {
        let mode = if vocab.is_some() {
            VocabMode::Frozen
        } else {
            VocabMode::Extend
        };
        let mut vocab = vocab.unwrap_or_default();
        let train = read_triples(&paths.train, &mut vocab, mode)?;
        let valid = match &paths.valid {
            Some(p) => read_triples(p, &mut vocab, mode)?,
            None => Vec::new(),
        };
        let test = match &paths.test {
            Some(p) => read_triples(p, &mut vocab, mode)?,
            None => Vec::new(),
        };
        let store = TripleStore::from_splits(vocab, train, valid, test)?;
        let unseen = store.entities_absent_from_train().len();
        if unseen > 0 {
            log::info!("{unseen} entities do not appear in the train split");
        }
        Ok(store)
    }

    /// Single-file load: the file becomes the train split.
    pub fn load_triples(path: &Path, vocab: Option<Vocab>) -> Result<Self> {
        TripleStore::load(
            &DatasetPaths {
                train: path.to_owned(),
                valid: None,
                test: None,
            },
            vocab,
        )
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn num_entities(&self) -> usize {
        self.vocab.num_entities()
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.num_relations()
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn filter(&self) -> &FilterIndex {
        &self.filter
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    /// Train triples followed by their reciprocals `(t, r + |R|, h)`.
    pub fn augmented_train(&self) -> impl Iterator<Item = Triple> + '_ {
        let nr = self.num_relations();
        self.train
            .iter()
            .copied()
            .chain(self.train.iter().map(move |t| t.reciprocal(nr)))
    }

    pub fn entities_absent_from_train(&self) -> Vec<u32> {
        let mut seen = vec![false; self.num_entities()];
        for t in &self.train {
            seen[t.head as usize] = true;
            seen[t.tail as usize] = true;
        }
        seen.iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(i, _)| i as u32)
            .collect()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            num_entities: self.num_entities(),
            num_relations: self.num_relations(),
            train: self.train.len(),
            valid: self.valid.len(),
            test: self.test.len(),
            duplicates_dropped: self.duplicates_dropped,
            entities_absent_from_train: self.entities_absent_from_train().len(),
        }
    }

    /// Writes the vocabulary, the three splits as named TSV and a JSON
    /// manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.vocab.save(dir)?;
        for split in [Split::Train, Split::Valid, Split::Test] {
            self.write_split(split, &dir.join(split.file_name()))?;
        }
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest())?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    /// Reverses [`TripleStore::save`]: ids and triple order are reproduced.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let vocab = Vocab::load(dir)?;
        TripleStore::load(
            &DatasetPaths {
                train: dir.join(Split::Train.file_name()),
                valid: Some(dir.join(Split::Valid.file_name())),
                test: Some(dir.join(Split::Test.file_name())),
            },
            Some(vocab),
        )
    }

    pub fn write_split(&self, split: Split, path: &Path) -> Result<()> {
        write_triples(path, &self.vocab, self.split(split))
    }
}

pub fn write_triples(path: &Path, vocab: &Vocab, triples: &[Triple]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for t in triples {
        writeln!(
            out,
            "{}\t{}\t{}",
            vocab.entity_name(t.head),
            vocab.relation_name(t.relation),
            vocab.entity_name(t.tail)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn check_id(what: &'static str, id: usize, size: usize) -> Result<()> {
    if id >= size {
        return Err(Error::OutOfRange { what, id, size });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComplexityClass {
    #[serde(rename = "1-to-1")]
    OneToOne,
    #[serde(rename = "1-to-N")]
    OneToMany,
    #[serde(rename = "N-to-1")]
    ManyToOne,
    #[serde(rename = "N-to-N")]
    ManyToMany,
}

impl ComplexityClass {
    pub const ALL: [ComplexityClass; 4] = [
        ComplexityClass::OneToOne,
        ComplexityClass::OneToMany,
        ComplexityClass::ManyToOne,
        ComplexityClass::ManyToMany,
    ];

    pub fn from_ratios(tphr: f64, hptr: f64) -> Self {
        match (tphr > COMPLEXITY_THRESHOLD, hptr > COMPLEXITY_THRESHOLD) {
            (false, false) => ComplexityClass::OneToOne,
            (true, false) => ComplexityClass::OneToMany,
            (false, true) => ComplexityClass::ManyToOne,
            (true, true) => ComplexityClass::ManyToMany,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ComplexityClass::OneToOne => "1-to-1",
            ComplexityClass::OneToMany => "1-to-N",
            ComplexityClass::ManyToOne => "N-to-1",
            ComplexityClass::ManyToMany => "N-to-N",
        }
    }
}

impl fmt::Display for ComplexityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationClass {
    pub relation: u32,
    /// Mean number of tails per distinct head.
    pub tphr: f64,
    /// Mean number of heads per distinct tail.
    pub hptr: f64,
    pub class: ComplexityClass,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationClassification {
    pub classes: Vec<RelationClass>,
    /// Relations without any train triple.
    pub excluded: Vec<u32>,
}

impl RelationClassification {
    pub fn class_of(&self, relation: u32) -> Option<ComplexityClass> {
        self.classes
            .iter()
            .find(|c| c.relation == relation)
            .map(|c| c.class)
    }
}

/// tphr/hptr per original relation, computed on the train split.
pub fn classify_relations(store: &TripleStore) -> Result<RelationClassification> {
    if store.train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    let nr = store.num_relations();
    let mut counts = vec![0usize; nr];
    let mut heads: Vec<HashSet<u32>> = vec![HashSet::new(); nr];
    let mut tails: Vec<HashSet<u32>> = vec![HashSet::new(); nr];
    for t in &store.train {
        let r = t.relation as usize;
        counts[r] += 1;
        heads[r].insert(t.head);
        tails[r].insert(t.tail);
    }
    let mut out = RelationClassification::default();
    for r in 0..nr {
        if counts[r] == 0 {
            out.excluded.push(r as u32);
            continue;
        }
        let tphr = counts[r] as f64 / heads[r].len() as f64;
        let hptr = counts[r] as f64 / tails[r].len() as f64;
        out.classes.push(RelationClass {
            relation: r as u32,
            tphr,
            hptr,
            class: ComplexityClass::from_ratios(tphr, hptr),
        });
    }
    if !out.excluded.is_empty() {
        log::warn!(
            "{} relations have no train triples and are not classified",
            out.excluded.len()
        );
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityCounts {
    pub counts: Vec<u64>,
    pub max: u64,
}

/// How often each entity occurs on `side` of a train triple.
pub fn entity_frequency(store: &TripleStore, side: Side) -> EntityCounts {
    let mut counts = vec![0u64; store.num_entities()];
    for t in &store.train {
        let e = match side {
            Side::Head => t.head,
            Side::Tail => t.tail,
        };
        counts[e as usize] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    EntityCounts { counts, max }
}
