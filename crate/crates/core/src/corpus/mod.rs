//! Annotated relation-extraction corpora.

mod contextual;
mod embeddings;
mod io;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::deptree::{span_root, DepTree};
use crate::error::{Error, Result};

pub use contextual::{load_contextual, write_contextual, ContextMatrix, ContextualStore};
pub use embeddings::{load_embeddings, EmbeddingTable};
pub use io::{load_corpus, write_corpus, CorpusFormat, LoadOptions};

/// Inclusive 0-based token range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// One relation instance: a tokenized, annotated sentence with its two
/// argument spans.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    pub ner: Vec<String>,
    /// 1-based parent per token; `0` marks the root.
    pub dep_head: Vec<usize>,
    pub dep_label: Vec<String>,
    pub head: Span,
    pub tail: Span,
    pub relation: String,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tree(&self) -> Result<DepTree> {
        DepTree::build(&self.dep_head)
    }
}

/// Lists every violated invariant of `s`; empty when the sentence is valid.
pub fn validate_sentence(s: &Sentence) -> Vec<String> {
    let mut out = Vec::new();
    let t = s.tokens.len();
    if t == 0 {
        out.push("empty sentence".to_string());
        return out;
    }
    let lengths = [
        ("pos", s.pos.len()),
        ("ner", s.ner.len()),
        ("dep_head", s.dep_head.len()),
        ("dep_label", s.dep_label.len()),
    ];
    for (name, len) in lengths {
        if len != t {
            out.push(format!("annotation length mismatch: {name}"));
        }
    }
    for (name, span) in [("head", s.head), ("tail", s.tail)] {
        if span.start > span.end {
            out.push(format!("span start > end ({name})"));
        } else if span.end >= t {
            out.push(format!("span out of bounds ({name})"));
        }
    }
    if s.head.start <= s.head.end && s.tail.start <= s.tail.end && s.head.overlaps(&s.tail) {
        out.push("head and tail spans overlap".to_string());
    }
    if s.dep_head.len() == t {
        out.extend(tree_violations(&s.dep_head));
    }
    out
}

fn tree_violations(dep_head: &[usize]) -> Vec<String> {
    let n = dep_head.len();
    let mut out = Vec::new();
    if let Some(i) = dep_head.iter().position(|&h| h > n) {
        out.push(format!("dep_head out of range at token {i}"));
        return out;
    }
    match dep_head.iter().filter(|&&h| h == 0).count() {
        0 => out.push("no root token".to_string()),
        1 => {}
        _ => out.push("multiple root tokens".to_string()),
    }
    // Any walk of more than n parent steps revisits a node.
    let cyclic = (0..n).any(|start| {
        let mut cur = start;
        for _ in 0..=n {
            match dep_head[cur] {
                0 => return false,
                h => cur = h - 1,
            }
        }
        true
    });
    if cyclic {
        out.push("cycle detected".to_string());
    }
    out
}

/// Replaces argument mentions with `SUBJ-<TYPE>` / `OBJ-<TYPE>` tokens, one
/// per original token, where `<TYPE>` is the NE tag of the span root.
pub fn mask_entities(s: &Sentence) -> Sentence {
    let tree = s.tree().ok();
    let root_of = |span: Span| tree.as_ref().map_or(span.end, |t| span_root(t, span));
    let head_tag = format!("SUBJ-{}", s.ner[root_of(s.head)]);
    let tail_tag = format!("OBJ-{}", s.ner[root_of(s.tail)]);
    let mut out = s.clone();
    for i in s.head.indices() {
        out.tokens[i] = head_tag.clone();
    }
    for i in s.tail.indices() {
        out.tokens[i] = tail_tag.clone();
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "dev" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub train: Vec<Sentence>,
    pub validation: Vec<Sentence>,
    pub test: Vec<Sentence>,
    /// Sorted distinct relations of the training split.
    pub label_inventory: Vec<String>,
    pub negative_label: Option<String>,
}

impl Corpus {
    /// Validates every sentence and the cross-sentence invariants.
    pub fn new(
        train: Vec<Sentence>,
        validation: Vec<Sentence>,
        test: Vec<Sentence>,
        negative_label: Option<String>,
    ) -> Result<Self> {
        let label_inventory: Vec<String> = train
            .iter()
            .map(|s| s.relation.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let corpus = Self {
            train,
            validation,
            test,
            label_inventory,
            negative_label,
        };
        corpus.check()?;
        Ok(corpus)
    }

    fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in self.sentences() {
            if let Some(v) = validate_sentence(s).into_iter().next() {
                return Err(Error::Invalid {
                    id: s.id.clone(),
                    violation: v,
                });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Invalid {
                    id: s.id.clone(),
                    violation: "duplicate sentence id".into(),
                });
            }
            if self.label_inventory.binary_search(&s.relation).is_err() {
                return Err(Error::Invalid {
                    id: s.id.clone(),
                    violation: format!("relation `{}` does not occur in the training split", s.relation),
                });
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> &[Sentence] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn split_mut(&mut self, split: Split) -> &mut Vec<Sentence> {
        match split {
            Split::Train => &mut self.train,
            Split::Validation => &mut self.validation,
            Split::Test => &mut self.test,
        }
    }

    /// All sentences, train first.
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fraction of all sentences carrying the negative label.
    pub fn negative_fraction(&self) -> f64 {
        let Some(neg) = &self.negative_label else {
            return 0.0;
        };
        if self.is_empty() {
            return 0.0;
        }
        self.sentences().filter(|s| &s.relation == neg).count() as f64 / self.len() as f64
    }

    /// Applies `f` to every sentence, keeping the split structure.
    pub fn map_sentences(&self, f: impl Fn(&Sentence) -> Sentence) -> Result<Corpus> {
        Corpus::new(
            self.train.iter().map(&f).collect(),
            self.validation.iter().map(&f).collect(),
            self.test.iter().map(&f).collect(),
            self.negative_label.clone(),
        )
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn bayer() -> Sentence {
        Sentence {
            id: "s1".into(),
            tokens: vec!["Bayer".into(), "acquired".into(), "Monsanto".into()],
            pos: vec!["NNP".into(), "VBD".into(), "NNP".into()],
            ner: vec!["ORGANIZATION".into(), "O".into(), "ORGANIZATION".into()],
            dep_head: vec![2, 0, 2],
            dep_label: vec!["nsubj".into(), "ROOT".into(), "dobj".into()],
            head: Span::new(0, 0),
            tail: Span::new(2, 2),
            relation: "org:subsidiaries".into(),
        }
    }

    #[test]
    fn valid_sentence_has_no_violations() {
        assert!(validate_sentence(&bayer()).is_empty());
    }

    #[test]
    fn cycle_without_root() {
        let mut s = bayer();
        s.dep_head = vec![2, 3, 1];
        assert_eq!(validate_sentence(&s), vec!["no root token", "cycle detected"]);
    }

    #[test]
    fn short_ner_list() {
        let mut s = bayer();
        s.ner.pop();
        assert_eq!(validate_sentence(&s), vec!["annotation length mismatch: ner"]);
    }

    #[test]
    fn inverted_and_overlapping_spans() {
        let mut s = bayer();
        s.head = Span::new(2, 1);
        assert_eq!(validate_sentence(&s), vec!["span start > end (head)"]);
        let mut s = bayer();
        s.tail = Span::new(0, 1);
        assert_eq!(validate_sentence(&s), vec!["head and tail spans overlap"]);
    }

    #[test]
    fn masking_replaces_mentions() {
        let mut s = bayer();
        s.tokens = vec!["Aerolineas".into(), "bought".into(), "Austral".into()];
        let m = mask_entities(&s);
        assert_eq!(m.tokens, vec!["SUBJ-ORGANIZATION", "bought", "OBJ-ORGANIZATION"]);
        assert_eq!(mask_entities(&m), m);
    }

    #[test]
    fn masking_multi_token_span_keeps_length() {
        // "Larry Page founded Google": Larry -> Page -> founded <- Google.
        let s = Sentence {
            id: "s2".into(),
            tokens: vec!["Larry".into(), "Page".into(), "founded".into(), "Google".into()],
            pos: vec!["NNP".into(), "NNP".into(), "VBD".into(), "NNP".into()],
            ner: vec!["O".into(), "PERSON".into(), "O".into(), "ORGANIZATION".into()],
            dep_head: vec![2, 3, 0, 3],
            dep_label: vec!["compound".into(), "nsubj".into(), "ROOT".into(), "dobj".into()],
            head: Span::new(0, 1),
            tail: Span::new(3, 3),
            relation: "per:employee_of".into(),
        };
        let m = mask_entities(&s);
        assert_eq!(m.tokens, vec!["SUBJ-PERSON", "SUBJ-PERSON", "founded", "OBJ-ORGANIZATION"]);
        assert_eq!(m.len(), s.len());
        assert_eq!((m.pos, m.dep_head, m.head, m.relation), (s.pos, s.dep_head, s.head, s.relation));
    }

    #[test]
    fn corpus_rejects_duplicate_ids_and_unknown_relations() {
        let err = Corpus::new(vec![bayer()], vec![bayer()], vec![], None).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        let mut other = bayer();
        other.id = "s9".into();
        other.relation = "per:title".into();
        let err = Corpus::new(vec![bayer()], vec![], vec![other], None).unwrap_err();
        assert!(err.to_string().contains("s9"));
    }
}
