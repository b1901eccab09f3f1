//! TOML run configuration.
//!
//! ```toml
//! model_kind = "star"        # star | tar | complex | distmult
//! dim = 32
//! lr = 0.1
//! batch_size = 100
//! epochs = 50
//! w0 = 0.1
//! seed = 0
//! optimizer = "adagrad"      # adagrad | sgd
//! eval_every = 5
//! init_scale = 1e-3
//! tie_rule = "pessimistic"   # pessimistic | random
//! out_dir = "runs/wn18rr"
//! threads = 1
//!
//! [data]
//! dir = "data/WN18RR"        # or train = ..., valid = ..., test = ...
//!
//! [reg]
//! kind = "dura"              # none | fro | dura
//! lambda = 0.1
//! dura_variant = "literal"   # literal | exact
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::data::DatasetPaths;
use crate::error::{Error, Result};
use crate::eval::TieRule;
use crate::regularization::RegConfig;
use crate::training::TrainConfig;

pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DatasetPaths,
    pub train: TrainConfig,
    pub tie_rule: TieRule,
    pub out_dir: PathBuf,
    /// Worker threads; `None` leaves the choice to the thread pool.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        RunConfig::from_toml_str(&text, base)
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_owned()))?;
        let mut t = TrainConfig::default();
        let mut fields = Fields::new(&mut root, "");
        if let Some(v) = fields.string("model_kind")? {
            t.model_kind = v.parse()?;
        }
        if let Some(v) = fields.uint("dim")? {
            t.dim = v;
        }
        if let Some(v) = fields.float("lr")? {
            t.lr = v;
        }
        if let Some(v) = fields.uint("batch_size")? {
            t.batch_size = v;
        }
        if let Some(v) = fields.uint("epochs")? {
            t.epochs = v;
        }
        if let Some(v) = fields.float("w0")? {
            t.w0 = v;
        }
        if let Some(v) = fields.uint("seed")? {
            t.seed = v as u64;
        }
        if let Some(v) = fields.string("optimizer")? {
            t.optimizer = v.parse()?;
        }
        if let Some(v) = fields.uint("eval_every")? {
            t.eval_every = v;
        }
        if let Some(v) = fields.float("init_scale")? {
            t.init_scale = v;
        }
        let tie_rule = match fields.string("tie_rule")? {
            Some(v) => v.parse()?,
            None => TieRule::default(),
        };
        let out_dir = fields
            .string("out_dir")?
            .map(|p| base.join(p))
            .ok_or_else(|| Error::config("out_dir", "missing"))?;
        let threads = fields.uint("threads")?;
        if threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        let mut data_table = fields
            .table("data")?
            .ok_or_else(|| Error::config("data", "missing [data] section"))?;
        let mut reg_table = fields.table("reg")?.unwrap_or_default();
        fields.finish()?;

        let mut d = Fields::new(&mut data_table, "data.");
        let dir = d.string("dir")?;
        let train = d.string("train")?;
        let valid = d.string("valid")?;
        let test = d.string("test")?;
        d.finish()?;
        let data = match (dir, train) {
            (Some(dir), None) if valid.is_none() && test.is_none() => {
                DatasetPaths::from_dir(&base.join(dir))
            }
            (None, Some(train)) => DatasetPaths {
                train: base.join(train),
                valid: valid.map(|p| base.join(p)),
                test: test.map(|p| base.join(p)),
            },
            (Some(_), _) => {
                return Err(Error::config(
                    "data.dir",
                    "cannot be combined with data.train/valid/test",
                ))
            }
            (None, None) => return Err(Error::config("data.train", "missing")),
        };

        let mut r = Fields::new(&mut reg_table, "reg.");
        let mut reg = RegConfig::none();
        if let Some(v) = r.string("kind")? {
            reg.kind = v.parse()?;
        }
        if let Some(v) = r.float("lambda")? {
            reg.lambda = v;
        }
        if let Some(v) = r.string("dura_variant")? {
            reg.dura_variant = v.parse()?;
        }
        r.finish()?;
        t.reg = reg;
        t.validate()?;

        Ok(RunConfig {
            data,
            train: t,
            tie_rule,
            out_dir,
            threads,
        })
    }

    /// Writes the resolved configuration as JSON into `out_dir`.
    pub fn write_manifest(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        let path = self.out_dir.join(RUN_CONFIG_FILE);
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Pulls typed values out of a TOML table, naming the offending key on error.
pub(crate) struct Fields<'a> {
    table: &'a mut Table,
    prefix: &'static str,
}

impl<'a> Fields<'a> {
    pub(crate) fn new(table: &'a mut Table, prefix: &'static str) -> Self {
        Fields { table, prefix }
    }

    fn name(&self, key: &str) -> String {
        format!("{}{key}", self.prefix)
    }

    fn wrong(&self, key: &str, want: &str, got: &Value) -> Error {
        Error::config(self.name(key), format!("expected {want}, found {}", got.type_str()))
    }

    pub(crate) fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(self.wrong(key, "a string", &v)),
        }
    }

    pub(crate) fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(f)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(v) => Err(self.wrong(key, "a number", &v)),
        }
    }

    pub(crate) fn uint(&mut self, key: &str) -> Result<Option<usize>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => usize::try_from(i)
                .map(Some)
                .map_err(|_| Error::config(self.name(key), "must be non-negative")),
            Some(v) => Err(self.wrong(key, "an integer", &v)),
        }
    }

    pub(crate) fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(v) => Err(self.wrong(key, "a boolean", &v)),
        }
    }

    pub(crate) fn table(&mut self, key: &str) -> Result<Option<Table>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(t)),
            Some(v) => Err(self.wrong(key, "a table", &v)),
        }
    }

    pub(crate) fn array(&mut self, key: &str) -> Result<Option<Vec<Value>>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(v) => Err(self.wrong(key, "an array", &v)),
        }
    }

    /// Rejects any key that was not consumed.
    pub(crate) fn finish(self) -> Result<()> {
        match self.table.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::config(self.name(k), "unknown key")),
        }
    }
}
