use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::Corpus;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CTXV";
const VERSION: u32 = 1;

/// Row-major `rows × cols` matrix of per-token vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl ContextMatrix {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Precomputed contextual vectors keyed by sentence id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContextualStore {
    matrices: BTreeMap<String, ContextMatrix>,
}

impl ContextualStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, m: ContextMatrix) {
        self.matrices.insert(id.into(), m);
    }

    pub fn get(&self, id: &str) -> Option<&ContextMatrix> {
        self.matrices.get(id)
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Common vector width, or `None` for an empty store.
    pub fn dim(&self) -> Option<usize> {
        self.matrices.values().next().map(|m| m.cols)
    }

    /// Checks that every corpus sentence has a matrix with one row per
    /// token and that all widths agree.
    pub fn check_against(&self, corpus: &Corpus) -> Result<()> {
        let dim = self.dim();
        for s in corpus.sentences() {
            let Some(m) = self.get(&s.id) else {
                return Err(Error::Contextual {
                    id: s.id.clone(),
                    message: "no vectors".into(),
                });
            };
            if m.rows != s.len() {
                return Err(Error::Contextual {
                    id: s.id.clone(),
                    message: format!("{} rows for {} tokens", m.rows, s.len()),
                });
            }
            if Some(m.cols) != dim {
                return Err(Error::Contextual {
                    id: s.id.clone(),
                    message: format!("width {} differs from {}", m.cols, dim.unwrap_or(0)),
                });
            }
        }
        Ok(())
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn format_err(message: impl Into<String>) -> Error {
    Error::Format {
        what: "contextual vector file",
        message: message.into(),
    }
}

pub fn load_contextual(path: &Path) -> Result<ContextualStore> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| format_err("missing header"))?;
    if &magic != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let mut store = ContextualStore::new();
    loop {
        let mut len_bytes = [0u8; 4];
        match r.read_exact(&mut len_bytes) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let id_len = u32::from_le_bytes(len_bytes) as usize;
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id).map_err(|_| format_err("truncated record id"))?;
        let id = String::from_utf8(id).map_err(|_| format_err("record id is not UTF-8"))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut bytes = vec![0u8; rows * cols * 4];
        r.read_exact(&mut bytes)
            .map_err(|_| format_err(format!("truncated matrix for {id}")))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        store.insert(id, ContextMatrix { rows, cols, data });
    }
    Ok(store)
}

pub fn write_contextual(path: &Path, store: &ContextualStore) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for (id, m) in &store.matrices {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        w.write_all(&(m.rows as u32).to_le_bytes())?;
        w.write_all(&(m.cols as u32).to_le_bytes())?;
        for x in &m.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}
