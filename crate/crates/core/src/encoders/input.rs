use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use relprobe_autodiff::{Graph, NodeId, Scalar, Tensor};
use serde::{Deserialize, Serialize};

use crate::corpus::{mask_entities, ContextMatrix, Sentence, Span};
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputConfig {
    pub word_dim: usize,
    /// Width of each of the two offset embeddings; `0` disables them.
    pub pos_dim: usize,
    pub max_offset: usize,
    pub use_contextual: bool,
    pub contextual_dim: usize,
    pub masking: bool,
    /// Keep word vectors fixed during training.
    #[serde(default)]
    pub freeze_words: bool,
}

impl InputConfig {
    pub fn width(&self) -> usize {
        self.word_dim + 2 * self.pos_dim + if self.use_contextual { self.contextual_dim } else { 0 }
    }

    pub fn check(&self) -> Result<()> {
        if self.word_dim == 0 {
            return Err(Error::Config("word_dim must be positive".into()));
        }
        if self.max_offset == 0 {
            return Err(Error::Config("max_offset must be at least 1".into()));
        }
        if self.use_contextual && self.contextual_dim == 0 {
            return Err(Error::Config("contextual_dim must be positive when contextual vectors are used".into()));
        }
        Ok(())
    }
}

/// Token inventory with reserved padding and unknown entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    /// Sorted distinct tokens of `sentences` after `[PAD, UNK]`.
    pub fn build<'a>(sentences: impl IntoIterator<Item = &'a Sentence>, masking: bool) -> Self {
        let mut set = BTreeSet::new();
        for s in sentences {
            let s = if masking { mask_entities(s) } else { s.clone() };
            set.extend(s.tokens);
        }
        set.remove(PAD);
        set.remove(UNK);
        let tokens = [PAD.to_string(), UNK.to_string()].into_iter().chain(set).collect();
        Self::from_tokens(tokens)
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Signed distance of each token to `span`, zero inside it, clipped to
/// `[-max_offset, max_offset]`.
pub fn position_offsets(span: Span, len: usize, max_offset: usize) -> Vec<i64> {
    let m = max_offset as i64;
    (0..len)
        .map(|i| {
            let off = if i < span.start {
                i as i64 - span.start as i64
            } else if i > span.end {
                (i - span.end) as i64
            } else {
                0
            };
            off.clamp(-m, m)
        })
        .collect()
}

/// Parameters and settings needed to embed a sentence.
pub struct InputParams<'a> {
    pub cfg: &'a InputConfig,
    pub vocab: &'a Vocab,
    pub word: relprobe_autodiff::ParamId,
    pub pos_head: Option<relprobe_autodiff::ParamId>,
    pub pos_tail: Option<relprobe_autodiff::ParamId>,
    pub word_dropout: f64,
    pub embedding_dropout: f64,
}

/// `T × width` input matrix: word vector, head offset, tail offset and
/// optional contextual vector per token.
pub fn embed_inputs<S: Scalar>(
    g: &mut Graph<'_, S>,
    p: &InputParams<'_>,
    s: &Sentence,
    ctx: Option<&ContextMatrix>,
) -> Result<NodeId> {
    let masked;
    let s = if p.cfg.masking {
        masked = mask_entities(s);
        &masked
    } else {
        s
    };
    let mut ids: Vec<usize> = s.tokens.iter().map(|t| p.vocab.id(t)).collect();
    if p.word_dropout > 0.0 {
        if let Some(rng) = g.rng() {
            for id in &mut ids {
                if rng.gen::<f64>() < p.word_dropout {
                    *id = UNK_ID;
                }
            }
        }
    }
    let table = g.param(p.word);
    let mut parts = vec![g.select_rows(table, &ids)?];
    if let (Some(ph), Some(pt)) = (p.pos_head, p.pos_tail) {
        for (param, span) in [(ph, s.head), (pt, s.tail)] {
            let rows: Vec<usize> = position_offsets(span, s.len(), p.cfg.max_offset)
                .into_iter()
                .map(|o| (o + p.cfg.max_offset as i64) as usize)
                .collect();
            let t = g.param(param);
            parts.push(g.select_rows(t, &rows)?);
        }
    }
    if p.cfg.use_contextual {
        let m = ctx.ok_or_else(|| Error::Contextual {
            id: s.id.clone(),
            message: "no vectors".into(),
        })?;
        if m.rows != s.len() || m.cols != p.cfg.contextual_dim {
            return Err(Error::Contextual {
                id: s.id.clone(),
                message: format!(
                    "{}x{} matrix for {} tokens of width {}",
                    m.rows,
                    m.cols,
                    s.len(),
                    p.cfg.contextual_dim
                ),
            });
        }
        let data = m.data.iter().map(|&x| S::from_f(x as f64)).collect();
        parts.push(g.input(Tensor::matrix(m.rows, m.cols, data)?));
    }
    let x = if parts.len() == 1 { parts[0] } else { g.concat_cols(&parts)? };
    Ok(g.dropout(x, p.embedding_dropout)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_single_token() {
        assert_eq!(position_offsets(Span::new(2, 2), 5, 50), vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn offsets_zero_inside_span() {
        assert_eq!(position_offsets(Span::new(1, 2), 4, 50), vec![-1, 0, 0, 1]);
    }

    #[test]
    fn offsets_clip() {
        let o = position_offsets(Span::new(0, 0), 71, 50);
        assert_eq!(o[70], 50);
    }

    #[test]
    fn vocab_reserves_pad_and_unk() {
        let s = crate::corpus::tests::bayer();
        let v = Vocab::build([&s], true);
        assert_eq!(v.tokens()[..2], [PAD, UNK]);
        assert_eq!(v.id("Bayer"), UNK_ID);
        assert_ne!(v.id("SUBJ-ORGANIZATION"), UNK_ID);
    }
}
