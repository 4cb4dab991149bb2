//! Frozen-encoder representations, baseline features, logistic-regression
//! probes and the suite runner.

mod probe;
mod suite;

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::{ContextualStore, EmbeddingTable, Sentence};
use crate::encoders::Model;
use crate::error::{Error, Result};

pub use probe::{train_probe, train_probe_at, ProbeOptions, ProbeResult, DEFAULT_GRID};
pub use suite::{render_table, run_suite, SuiteReport, SuiteRow, SuiteSource};

const MAGIC: &[u8; 4] = b"REPR";
const VERSION: u32 = 1;

/// Sentence representations keyed by id.
#[derive(Clone, Debug, PartialEq)]
pub struct RepMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    source: String,
    index: HashMap<String, usize>,
}

fn bad(message: impl Into<String>) -> Error {
    Error::Format {
        what: "representation matrix",
        message: message.into(),
    }
}

impl RepMatrix {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>, source: impl Into<String>) -> Result<Self> {
        if data.len() != ids.len() * dim {
            return Err(bad(format!("{} ids x {dim} columns but {} values", ids.len(), data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(bad(format!("non-finite value in row for {}", ids[i / dim.max(1)])));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(bad(format!("duplicate id {id}")));
            }
        }
        Ok(Self {
            ids,
            dim,
            data,
            source: source.into(),
            index,
        })
    }

    pub fn from_rows(rows: Vec<(String, Vec<f32>)>, dim: usize, source: impl Into<String>) -> Result<Self> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (id, row) in rows {
            if row.len() != dim {
                return Err(bad(format!("row {id} has {} values, expected {dim}", row.len())));
            }
            ids.push(id);
            data.extend(row);
        }
        Self::new(ids, dim, data, source)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    /// Rows of `other` appended; ids must stay unique and widths agree.
    pub fn concat(&self, other: &RepMatrix) -> Result<RepMatrix> {
        if self.dim != other.dim {
            return Err(bad(format!("cannot join widths {} and {}", self.dim, other.dim)));
        }
        let ids = self.ids.iter().chain(&other.ids).cloned().collect();
        let data = self.data.iter().chain(&other.data).copied().collect();
        RepMatrix::new(ids, self.dim, data, self.source.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for id in &self.ids {
            put_str(&mut out, id);
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        put_str(&mut out, &self.source);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let n = u64::from_le_bytes(take(&mut r)?) as usize;
        let dim = u64::from_le_bytes(take(&mut r)?) as usize;
        let ids = (0..n).map(|_| get_str(&mut r)).collect::<Result<Vec<_>>>()?;
        let count = n.checked_mul(dim).ok_or_else(|| bad("size overflow"))?;
        if r.len() < count * 4 {
            return Err(bad("truncated data block"));
        }
        let data = (0..count).map(|_| take(&mut r).map(f32::from_le_bytes)).collect::<Result<Vec<_>>>()?;
        let source = if r.is_empty() { String::new() } else { get_str(&mut r)? };
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        RepMatrix::new(ids, dim, data, source)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Hex SHA-256 of the serialized matrix.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| bad("truncated header"))
}

fn take<const N: usize>(r: &mut &[u8]) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

fn get_str(r: &mut &[u8]) -> Result<String> {
    let len = u32::from_le_bytes(take(r)?) as usize;
    if r.len() < len {
        return Err(bad("truncated string"));
    }
    let (s, rest) = r.split_at(len);
    *r = rest;
    String::from_utf8(s.to_vec()).map_err(|_| bad("id is not UTF-8"))
}

/// Source tag for representations of a checkpoint file.
pub fn checkpoint_source(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("checkpoint:{}", &hex(&Sha256::digest(bytes))[..16]))
}

/// Eval-mode representations of `sentences` from a frozen model.
pub fn extract_reps(
    model: &Model,
    sentences: &[Sentence],
    ctx: Option<&ContextualStore>,
    source: &str,
) -> Result<RepMatrix> {
    if model.config.input.use_contextual && ctx.is_none() {
        return Err(Error::Config("model needs contextual vectors but none were supplied".into()));
    }
    let rows = sentences
        .iter()
        .map(|s| {
            let c = match ctx {
                Some(store) if model.config.input.use_contextual => Some(store.get(&s.id).ok_or_else(|| {
                    Error::Contextual {
                        id: s.id.clone(),
                        message: "missing".into(),
                    }
                })?),
                _ => None,
            };
            Ok((s.id.clone(), model.represent(s, c)?))
        })
        .collect::<Result<Vec<_>>>()?;
    RepMatrix::from_rows(rows, model.rep_dim(), source)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaselineKind {
    Length,
    ArgDist,
    Boe,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Length, BaselineKind::ArgDist, BaselineKind::Boe];

    pub fn name(self) -> &'static str {
        match self {
            Self::Length => "Length",
            Self::ArgDist => "ArgDist",
            Self::Boe => "BoE",
        }
    }

    /// One raw count per sentence rather than a vector.
    pub fn is_scalar(self) -> bool {
        self != Self::Boe
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "length" => Ok(Self::Length),
            "argdist" => Ok(Self::ArgDist),
            "boe" => Ok(Self::Boe),
            _ => Err(Error::Config(format!("unknown baseline `{s}` (length, argdist, boe)"))),
        }
    }
}

/// Tokens strictly between the two arguments.
pub fn arg_distance(s: &Sentence) -> usize {
    let (first, second) = if s.head.start <= s.tail.start {
        (s.head, s.tail)
    } else {
        (s.tail, s.head)
    };
    second.start.saturating_sub(first.end + 1)
}

pub fn baseline_features(kind: BaselineKind, s: &Sentence, table: Option<&EmbeddingTable>) -> Result<Vec<f32>> {
    match kind {
        BaselineKind::Length => Ok(vec![s.len() as f32]),
        BaselineKind::ArgDist => Ok(vec![arg_distance(s) as f32]),
        BaselineKind::Boe => {
            let table = table.ok_or_else(|| Error::Config("the BoE baseline needs an embedding table".into()))?;
            let mut sum = vec![0.0f32; table.dim()];
            for token in &s.tokens {
                for (a, b) in sum.iter_mut().zip(table.lookup(token)) {
                    *a += b;
                }
            }
            Ok(sum)
        }
    }
}

pub fn baseline_reps(kind: BaselineKind, sentences: &[Sentence], table: Option<&EmbeddingTable>) -> Result<RepMatrix> {
    let dim = match kind {
        BaselineKind::Boe => table.map_or(0, EmbeddingTable::dim),
        _ => 1,
    };
    let rows = sentences
        .iter()
        .map(|s| Ok((s.id.clone(), baseline_features(kind, s, table)?)))
        .collect::<Result<Vec<_>>>()?;
    RepMatrix::from_rows(rows, dim, format!("baseline:{}", kind.name().to_ascii_lowercase()))
}
