use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Pre-trained word vectors with a total lookup.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
    unk: Vec<f32>,
    pad: Vec<f32>,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs. A repeated token keeps
    /// its first vector.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (String, Vec<f32>)>) -> Result<Self> {
        let mut table = Self {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            unk: vec![0.0; dim],
            pad: vec![0.0; dim],
        };
        for (line, (tok, v)) in pairs.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Embedding {
                    line: line + 1,
                    message: format!("expected {dim} values, found {}", v.len()),
                });
            }
            if table.index.contains_key(&tok) {
                continue;
            }
            table.index.insert(tok.clone(), table.tokens.len());
            table.tokens.push(tok);
            table.vectors.extend(v);
        }
        table.unk = table.mean();
        Ok(table)
    }

    /// Uniform vectors in `[-0.1, 0.1]` for tokens without pre-trained
    /// embeddings.
    pub fn random<'a>(tokens: impl IntoIterator<Item = &'a str>, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<(String, Vec<f32>)> = tokens
            .into_iter()
            .map(|t| (t.to_string(), (0..dim).map(|_| rng.gen_range(-0.1..0.1)).collect()))
            .collect();
        Self::from_pairs(dim, pairs).expect("generated vectors have the right width")
    }

    fn mean(&self) -> Vec<f32> {
        let n = self.tokens.len();
        if n == 0 {
            return vec![0.0; self.dim];
        }
        let mut acc = vec![0.0f64; self.dim];
        for row in self.vectors.chunks(self.dim) {
            for (a, &x) in acc.iter_mut().zip(row) {
                *a += x as f64;
            }
        }
        acc.into_iter().map(|a| (a / n as f64) as f32).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Stored vector, or the unknown vector.
    pub fn lookup(&self, token: &str) -> &[f32] {
        self.get(token).unwrap_or(&self.unk)
    }

    pub fn unk_vector(&self) -> &[f32] {
        &self.unk
    }

    pub fn pad_vector(&self) -> &[f32] {
        &self.pad
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (i, tok) in self.tokens.iter().enumerate() {
            write!(w, "{tok}")?;
            for x in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_embeddings(path: &Path, dim: usize) -> Result<EmbeddingTable> {
    let reader = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(tok) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f32>())
            .collect::<std::result::Result<Vec<f32>, _>>()
            .map_err(|e| Error::Embedding {
                line: i + 1,
                message: e.to_string(),
            })?;
        if values.len() != dim {
            return Err(Error::Embedding {
                line: i + 1,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        pairs.push((tok.to_string(), values));
    }
    EmbeddingTable::from_pairs(dim, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(name: &str, text: &str) -> std::path::PathBuf {
        let p = std::env::temp_dir().join(format!("relprobe-emb-{name}-{}", std::process::id()));
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn loads_two_vectors() {
        let p = write_tmp("two", "a 1 2 3 4\nb 3 2 1 0\n");
        let t = load_embeddings(&p, 4).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("b"), &[3.0, 2.0, 1.0, 0.0]);
        assert_eq!(t.pad_vector(), &[0.0; 4]);
    }

    #[test]
    fn short_line_reports_line_number() {
        let p = write_tmp("short", "a 1 2 3 4\nb 1 2 3\n");
        let err = load_embeddings(&p, 4).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_token_gets_mean() {
        let p = write_tmp("mean", "a 1 0 5\nb 2 4 -1\nc 0 2 2\n");
        let t = load_embeddings(&p, 3).unwrap();
        let rows = [[1.0f32, 0.0, 5.0], [2.0, 4.0, -1.0], [0.0, 2.0, 2.0]];
        let mut expect = [0.0f32; 3];
        for r in &rows {
            for j in 0..3 {
                expect[j] += r[j] / 3.0;
            }
        }
        for (got, want) in t.lookup("zzz").iter().zip(expect) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn write_then_load_round_trips() {
        let t = EmbeddingTable::random(["x", "y", "z"], 5, 3);
        let p = std::env::temp_dir().join(format!("relprobe-emb-rt-{}", std::process::id()));
        t.write(&p).unwrap();
        assert_eq!(load_embeddings(&p, 5).unwrap(), t);
    }
}
