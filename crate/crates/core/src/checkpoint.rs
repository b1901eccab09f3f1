//! Binary checkpoints with a JSON sidecar.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic  "STARKGE\0"      8 bytes
//! version u32
//! n, |E|, 2|R|  u64 each
//! model_kind    u8
//! entities, r_c, tau   row-major f64
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{check_dim, EmbeddingTable, ModelKind};

pub const MAGIC: &[u8; 8] = b"STARKGE\0";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config_hash: String,
    pub epoch: usize,
    pub model_kind: ModelKind,
    pub dim: usize,
    pub num_entities: usize,
    pub num_relation_rows: usize,
}

/// SHA-256 of a value's JSON serialization, hex encoded.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

pub fn encode(table: &EmbeddingTable) -> Vec<u8> {
    let mats = [
        table.entities(),
        table.relation_complex(),
        table.relation_translation(),
    ];
    let floats: usize = mats.iter().map(|m| m.len()).sum();
    let mut out = Vec::with_capacity(8 + 4 + 24 + 1 + 8 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [table.dim(), table.num_entities(), table.num_relation_rows()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.push(table.kind().code());
    for m in mats {
        for v in m.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], len: usize) -> Result<&'a [u8]> {
    if bytes.len() < len {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    let (head, rest) = bytes.split_at(len);
    *bytes = rest;
    Ok(head)
}

fn take_u64(bytes: &mut &[u8]) -> Result<usize> {
    let raw = take(bytes, 8)?;
    let v = u64::from_le_bytes(raw.try_into().expect("8 bytes"));
    usize::try_from(v).map_err(|_| Error::Checkpoint(format!("size {v} too large")))
}

fn take_matrix(bytes: &mut &[u8], rows: usize, cols: usize) -> Result<Array2<f64>> {
    let len = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Checkpoint("matrix size overflows".into()))?;
    let raw = take(bytes, len)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("shape matches length"))
}

pub fn decode(mut bytes: &[u8]) -> Result<EmbeddingTable> {
    let b = &mut bytes;
    if take(b, 8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(b, 4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n = take_u64(b)?;
    let ne = take_u64(b)?;
    let nrows = take_u64(b)?;
    check_dim(n).map_err(|_| Error::Checkpoint(format!("invalid dimension {n}")))?;
    let code = take(b, 1)?[0];
    let kind = ModelKind::from_code(code)
        .ok_or_else(|| Error::Checkpoint(format!("unknown model kind code {code}")))?;
    let entities = take_matrix(b, ne, n)?;
    let r_c = take_matrix(b, nrows, n)?;
    let tau = take_matrix(b, nrows, n)?;
    if !b.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", b.len())));
    }
    Ok(EmbeddingTable::from_raw(entities, r_c, tau, kind))
}

/// Writes the checkpoint and its `<file>.json` sidecar.
pub fn save(path: &Path, table: &EmbeddingTable, config_hash: &str, epoch: usize) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode(table))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))?;
    let meta = CheckpointMeta {
        config_hash: config_hash.to_owned(),
        epoch,
        model_kind: table.kind(),
        dim: table.dim(),
        num_entities: table.num_entities(),
        num_relation_rows: table.num_relation_rows(),
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta)?;
    fs::write(&side, json + "\n").map_err(|e| Error::io(side, e))
}

pub fn load(path: &Path) -> Result<EmbeddingTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn load_meta(path: &Path) -> Result<CheckpointMeta> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    Ok(serde_json::from_str(&text)?)
}
