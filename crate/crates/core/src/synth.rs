//! Deterministic generator of fully annotated synthetic relation corpora.
//!
//! A [`Template`] is a generic-jsonl record whose tokens may be slot
//! markers such as `[PER]`. Each slot is filled from the lexicon of that
//! type; a multi-word filler expands into several tokens, the last of which
//! keeps the slot's attachment while the others attach to it as
//! `compound`. Optional padding clauses ("in the old city") are appended
//! to vary sentence length and tree depth.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{validate_sentence, Corpus, Sentence, Span, Split};
use crate::error::{Error, Result};

/// Words of one slot type and the annotations they carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub ner: String,
    pub pos: String,
    pub words: Vec<String>,
    /// Name substituted for `{head}`/`{tail}` in relation rules; defaults to
    /// the slot type.
    #[serde(default)]
    pub label: Option<String>,
}

/// Sentence skeleton in generic-jsonl shape. Slot tokens look like
/// `[TYPE]`; their `pos`/`ner` entries are ignored. `relation` may contain
/// `{head}` and `{tail}`, replaced by the lexicon label of the filler in
/// the corresponding argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    #[serde(default)]
    pub id: String,
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    pub ner: Vec<String>,
    pub dep_head: Vec<usize>,
    pub dep_label: Vec<String>,
    pub head_start: usize,
    pub head_end: usize,
    pub tail_start: usize,
    pub tail_end: usize,
    pub relation: String,
}

impl Template {
    fn slot_type(token: &str) -> Option<&str> {
        token.strip_prefix('[')?.strip_suffix(']')
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Padding {
    /// Clause count is uniform in `0..=max_clauses`.
    pub max_clauses: usize,
    /// Probability that a clause attaches to the previous clause's noun
    /// rather than the sentence root.
    pub chain_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub templates: Vec<Template>,
    pub lexicons: BTreeMap<String, Lexicon>,
    #[serde(default)]
    pub padding: Option<Padding>,
    #[serde(default)]
    pub negative_label: Option<String>,
    pub seed: u64,
}

const PREPS: [&str; 8] = ["in", "on", "near", "after", "before", "with", "during", "under"];
const ADJS: [&str; 6] = ["old", "new", "large", "quiet", "early", "late"];
const NOUNS: [&str; 10] = [
    "city", "morning", "meeting", "year", "office", "market", "river", "garden", "report", "season",
];

#[derive(Clone)]
struct Filler {
    slot_type: String,
    words: Vec<String>,
}

impl SynthConfig {
    /// Checks templates against the lexicons before any sentence is built.
    pub fn check(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::Template {
                slot: "-".into(),
                message: "no templates".into(),
            });
        }
        for (ti, t) in self.templates.iter().enumerate() {
            let name = if t.id.is_empty() { format!("#{ti}") } else { t.id.clone() };
            let n = t.tokens.len();
            for (field, len) in [
                ("pos", t.pos.len()),
                ("ner", t.ner.len()),
                ("dep_head", t.dep_head.len()),
                ("dep_label", t.dep_label.len()),
            ] {
                if len != n {
                    return Err(Error::Template {
                        slot: field.into(),
                        message: format!("template {name}: {len} entries for {n} tokens"),
                    });
                }
            }
            for tok in &t.tokens {
                if let Some(ty) = Template::slot_type(tok) {
                    match self.lexicons.get(ty) {
                        Some(lex) if !lex.words.is_empty() => {}
                        _ => {
                            return Err(Error::Template {
                                slot: ty.into(),
                                message: format!("template {name}: no lexicon words for this slot"),
                            })
                        }
                    }
                }
            }
            for (role, s, e) in [("head", t.head_start, t.head_end), ("tail", t.tail_start, t.tail_end)] {
                if s != e || e >= n || Template::slot_type(&t.tokens[s]).is_none() {
                    return Err(Error::Template {
                        slot: role.into(),
                        message: format!("template {name}: {role} span must be a single slot token"),
                    });
                }
            }
            if t.head_start == t.tail_start {
                return Err(Error::Template {
                    slot: "head".into(),
                    message: format!("template {name}: head and tail share a slot"),
                });
            }
        }
        Ok(())
    }

    fn label_of(&self, slot_type: &str) -> String {
        self.lexicons[slot_type]
            .label
            .clone()
            .unwrap_or_else(|| slot_type.to_string())
    }

    fn draw_filler(&self, slot_type: &str, rng: &mut ChaCha8Rng) -> Filler {
        let word = self.lexicons[slot_type]
            .words
            .choose(rng)
            .expect("checked non-empty");
        Filler {
            slot_type: slot_type.into(),
            words: word.split_whitespace().map(str::to_string).collect(),
        }
    }

    /// Slot fillers for template `t`, indexed by token position.
    fn draw_fillers(&self, t: &Template, rng: &mut ChaCha8Rng) -> Vec<Option<Filler>> {
        t.tokens
            .iter()
            .map(|tok| Template::slot_type(tok).map(|ty| self.draw_filler(ty, rng)))
            .collect()
    }

    fn pick_template(&self, i: usize, rng: &mut ChaCha8Rng) -> usize {
        // The first training sentences walk through every template so that
        // each relation occurs in train.
        if i < self.templates.len() {
            i
        } else {
            rng.gen_range(0..self.templates.len())
        }
    }
}

struct Draft {
    tokens: Vec<String>,
    pos: Vec<String>,
    ner: Vec<String>,
    dep_head: Vec<usize>,
    dep_label: Vec<String>,
}

/// Fills `t`; `swap` exchanges the fillers of the two argument slots while
/// the head span follows the head filler.
fn realize(
    cfg: &SynthConfig,
    t: &Template,
    fillers: &[Option<Filler>],
    swap: bool,
    padding: &[PadClause],
    id: String,
) -> Sentence {
    let (hs, ts) = (t.head_start, t.tail_start);
    let filler_at = |i: usize| -> Option<&Filler> {
        let j = match (swap, i) {
            (true, i) if i == hs => ts,
            (true, i) if i == ts => hs,
            _ => i,
        };
        fillers[j].as_ref()
    };

    // Template position -> range of output tokens.
    let mut ranges = Vec::with_capacity(t.tokens.len());
    let mut next = 0;
    for i in 0..t.tokens.len() {
        let width = filler_at(i).map_or(1, |f| f.words.len());
        ranges.push(next..next + width);
        next += width;
    }
    let anchor = |i: usize| ranges[i].end - 1;

    let mut d = Draft {
        tokens: Vec::new(),
        pos: Vec::new(),
        ner: Vec::new(),
        dep_head: Vec::new(),
        dep_label: Vec::new(),
    };
    for i in 0..t.tokens.len() {
        let parent = match t.dep_head[i] {
            0 => 0,
            h => anchor(h - 1) + 1,
        };
        match filler_at(i) {
            Some(f) => {
                let lex = &cfg.lexicons[&f.slot_type];
                let last = f.words.len() - 1;
                for (k, w) in f.words.iter().enumerate() {
                    d.tokens.push(w.clone());
                    d.pos.push(lex.pos.clone());
                    d.ner.push(lex.ner.clone());
                    if k == last {
                        d.dep_head.push(parent);
                        d.dep_label.push(t.dep_label[i].clone());
                    } else {
                        d.dep_head.push(anchor(i) + 1);
                        d.dep_label.push("compound".into());
                    }
                }
            }
            None => {
                d.tokens.push(t.tokens[i].clone());
                d.pos.push(t.pos[i].clone());
                d.ner.push(t.ner[i].clone());
                d.dep_head.push(parent);
                d.dep_label.push(t.dep_label[i].clone());
            }
        }
    }
    let root = t.dep_head.iter().position(|&h| h == 0).map_or(0, anchor);
    append_padding(&mut d, root, padding);

    let (head_slot, tail_slot) = if swap { (ts, hs) } else { (hs, ts) };
    let span_of = |i: usize| Span::new(ranges[i].start, ranges[i].end - 1);
    let head_type = &filler_at(head_slot).expect("head slot").slot_type;
    let tail_type = &filler_at(tail_slot).expect("tail slot").slot_type;
    let relation = t
        .relation
        .replace("{head}", &cfg.label_of(head_type))
        .replace("{tail}", &cfg.label_of(tail_type));
    Sentence {
        id,
        tokens: d.tokens,
        pos: d.pos,
        ner: d.ner,
        dep_head: d.dep_head,
        dep_label: d.dep_label,
        head: span_of(head_slot),
        tail: span_of(tail_slot),
        relation,
    }
}

#[derive(Clone, Debug)]
struct PadClause {
    prep: &'static str,
    det: bool,
    adj: Option<&'static str>,
    noun: &'static str,
    chain: bool,
}

fn draw_padding(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<PadClause> {
    let Some(p) = &cfg.padding else {
        return Vec::new();
    };
    let n = rng.gen_range(0..=p.max_clauses);
    (0..n)
        .map(|k| PadClause {
            prep: PREPS[rng.gen_range(0..PREPS.len())],
            det: rng.gen_bool(0.5),
            adj: rng.gen_bool(0.5).then(|| ADJS[rng.gen_range(0..ADJS.len())]),
            noun: NOUNS[rng.gen_range(0..NOUNS.len())],
            chain: k > 0 && rng.gen_bool(p.chain_prob),
        })
        .collect()
}

fn append_padding(d: &mut Draft, root: usize, clauses: &[PadClause]) {
    let mut prev_noun = None;
    for c in clauses {
        let target = match (c.chain, prev_noun) {
            (true, Some(n)) => n,
            _ => root,
        };
        let prep = d.tokens.len();
        let noun = prep + 1 + c.det as usize + c.adj.is_some() as usize;
        let mut push = |tok: &str, pos: &str, head: usize, label: &str| {
            d.tokens.push(tok.into());
            d.pos.push(pos.into());
            d.ner.push("O".into());
            d.dep_head.push(head + 1);
            d.dep_label.push(label.into());
        };
        push(c.prep, "IN", target, "prep");
        if c.det {
            push("the", "DT", noun, "det");
        }
        if let Some(a) = c.adj {
            push(a, "JJ", noun, "amod");
        }
        push(c.noun, "NN", prep, "pobj");
        prev_noun = Some(noun);
    }
}

fn sentence_id(split: Split, i: usize) -> String {
    format!("{}-{:05}", split.name(), i)
}

fn finish(cfg: &SynthConfig, splits: [Vec<Sentence>; 3]) -> Result<Corpus> {
    for s in splits.iter().flatten() {
        if let Some(v) = validate_sentence(s).into_iter().next() {
            return Err(Error::Template {
                slot: s.id.clone(),
                message: v,
            });
        }
    }
    let [train, validation, test] = splits;
    Corpus::new(train, validation, test, cfg.negative_label.clone())
}

pub fn generate(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let counts = [cfg.n_train, cfg.n_val, cfg.n_test];
    let mut pool = TemplatePool::default();
    let splits = Split::ALL.map(|split| {
        let n = counts[split as usize];
        (0..n)
            .map(|i| {
                let ti = pool.pick(cfg, split, i, &mut rng);
                let t = &cfg.templates[ti];
                let fillers = cfg.draw_fillers(t, &mut rng);
                let pad = draw_padding(cfg, &mut rng);
                realize(cfg, t, &fillers, false, &pad, sentence_id(split, i))
            })
            .collect()
    });
    finish(cfg, splits)
}

/// Template choice per split. Validation and test draw only from templates
/// already used in train, so their relations stay inside the training
/// inventory even for tiny training splits.
#[derive(Default)]
struct TemplatePool {
    used: std::collections::BTreeSet<usize>,
}

impl TemplatePool {
    fn pick(&mut self, cfg: &SynthConfig, split: Split, i: usize, rng: &mut ChaCha8Rng) -> usize {
        if split == Split::Train {
            let t = cfg.pick_template(i, rng);
            self.used.insert(t);
            return t;
        }
        if self.used.is_empty() {
            return rng.gen_range(0..cfg.templates.len());
        }
        let k = rng.gen_range(0..self.used.len());
        *self.used.iter().nth(k).expect("index in range")
    }
}

/// Pairs of sentences with identical token multisets and opposite argument
/// order. Split sizes in `cfg` count pairs; both members of a pair land in
/// the same split.
pub fn generate_order_controlled(cfg: &SynthConfig, seed: u64) -> Result<Corpus> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = [cfg.n_train, cfg.n_val, cfg.n_test];
    let mut pool = TemplatePool::default();
    let splits = Split::ALL.map(|split| {
        let n = counts[split as usize];
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            let ti = pool.pick(cfg, split, i, &mut rng);
            let t = &cfg.templates[ti];
            let fillers = cfg.draw_fillers(t, &mut rng);
            let pad = draw_padding(cfg, &mut rng);
            out.push(realize(cfg, t, &fillers, false, &pad, sentence_id(split, 2 * i)));
            out.push(realize(cfg, t, &fillers, true, &pad, sentence_id(split, 2 * i + 1)));
        }
        out
    });
    finish(cfg, splits)
}

pub fn load_templates(path: &Path) -> Result<Vec<Template>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut t: Template = serde_json::from_str(&line).map_err(|e| Error::Parse {
            location: format!("{}:{}", path.display(), i + 1),
            field: "<template>".into(),
            message: e.to_string(),
        })?;
        if t.id.is_empty() {
            t.id = format!("line{}", i + 1);
        }
        out.push(t);
    }
    Ok(out)
}

/// Built-in generator settings.
pub mod presets {
    use super::*;

    fn lex(ner: &str, pos: &str, words: &[&str]) -> Lexicon {
        Lexicon {
            ner: ner.into(),
            pos: pos.into(),
            words: words.iter().map(|w| w.to_string()).collect(),
            label: None,
        }
    }

    /// `spec` is `token/POS/NER/head/label` per token, space separated.
    fn template(id: &str, spec: &str, head: usize, tail: usize, relation: &str) -> Template {
        let mut t = Template {
            id: id.into(),
            tokens: Vec::new(),
            pos: Vec::new(),
            ner: Vec::new(),
            dep_head: Vec::new(),
            dep_label: Vec::new(),
            head_start: head,
            head_end: head,
            tail_start: tail,
            tail_end: tail,
            relation: relation.into(),
        };
        for tok in spec.split_whitespace() {
            let f: Vec<&str> = tok.split('/').collect();
            t.tokens.push(f[0].into());
            t.pos.push(f[1].into());
            t.ner.push(f[2].into());
            t.dep_head.push(f[3].parse().expect("preset head index"));
            t.dep_label.push(f[4].into());
        }
        t
    }

    fn entity_lexicons() -> BTreeMap<String, Lexicon> {
        let mut m = BTreeMap::new();
        m.insert(
            "PER".into(),
            lex(
                "PERSON",
                "NNP",
                &[
                    "Anna Berg", "Tomas", "Lena Holt", "Marek", "Ines Ruiz", "Oskar", "Priya Nair", "Jonas",
                    "Hana Sato", "Emil", "Carla Diaz", "Viktor",
                ],
            ),
        );
        m.insert(
            "ORG".into(),
            lex(
                "ORGANIZATION",
                "NNP",
                &[
                    "Acme", "Borealis Group", "Castell", "Dunmore Bank", "Everline", "Fjord Labs", "Gantry",
                    "Halcyon Media", "Ironwood", "Juniper Trust",
                ],
            ),
        );
        m.insert(
            "LOC".into(),
            lex(
                "LOCATION",
                "NNP",
                &[
                    "Arden", "Brookfield", "Corvale", "Delmar", "Eastwick", "Fairhaven", "Glenrock", "Harlow",
                ],
            ),
        );
        m.insert(
            "TITLE".into(),
            lex("TITLE", "NN", &["director", "chairman", "founder", "treasurer", "editor"]),
        );
        m
    }

    /// Templates with template-determined relations covering every
    /// grammatical-role class and both argument orders.
    pub fn basic_templates() -> Vec<Template> {
        vec![
            template("acquired", "[ORG]/_/_/2/nsubj acquired/VBD/O/0/ROOT [ORG]/_/_/2/dobj", 0, 2, "org:subsidiaries"),
            template(
                "works-for",
                "[PER]/_/_/2/nsubj works/VBZ/O/0/ROOT for/IN/O/2/prep [ORG]/_/_/3/pobj",
                0,
                3,
                "per:employee_of",
            ),
            template(
                "born-in",
                "[PER]/_/_/3/nsubjpass was/VBD/O/3/auxpass born/VBN/O/0/ROOT in/IN/O/3/prep [LOC]/_/_/4/pobj",
                0,
                4,
                "per:city_of_birth",
            ),
            template(
                "based-in",
                "[ORG]/_/_/3/nsubjpass is/VBZ/O/3/auxpass based/VBN/O/0/ROOT in/IN/O/3/prep [LOC]/_/_/4/pobj",
                0,
                4,
                "org:city_of_headquarters",
            ),
            template("met", "[PER]/_/_/2/nsubj met/VBD/O/0/ROOT [PER]/_/_/2/dobj", 0, 2, "no_relation"),
            template("hired", "[ORG]/_/_/2/nsubj hired/VBD/O/0/ROOT [PER]/_/_/2/dobj", 2, 0, "per:employee_of"),
            template(
                "home-of",
                "[LOC]/_/_/0/ROOT ,/,/O/1/punct home/NN/O/1/appos of/IN/O/3/prep [ORG]/_/_/4/pobj",
                4,
                0,
                "org:city_of_headquarters",
            ),
            template(
                "title",
                "[PER]/_/_/0/ROOT ,/,/O/1/punct [TITLE]/_/_/1/appos of/IN/O/3/prep [ORG]/_/_/4/pobj",
                0,
                2,
                "per:title",
            ),
            template(
                "gave",
                "[ORG]/_/_/2/nsubj gave/VBD/O/0/ROOT [PER]/_/_/2/iobj a/DT/O/5/det grant/NN/O/2/dobj",
                0,
                2,
                "no_relation",
            ),
            template(
                "sibling",
                "[PER]/_/_/3/poss 's/POS/O/1/possessive brother/NN/O/0/ROOT ,/,/O/3/punct [PER]/_/_/3/appos",
                0,
                4,
                "per:siblings",
            ),
        ]
    }

    /// Template relations with no padding.
    pub fn basic(n_train: usize, n_val: usize, n_test: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            n_train,
            n_val,
            n_test,
            templates: basic_templates(),
            lexicons: entity_lexicons(),
            padding: None,
            negative_label: Some("no_relation".into()),
            seed,
        }
    }

    /// Like [`basic`] with up to 20 padding clauses, giving sentence
    /// lengths from 3 to roughly 85 tokens.
    pub fn varied(n_train: usize, n_val: usize, n_test: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            padding: Some(Padding {
                max_clauses: 20,
                chain_prob: 0.3,
            }),
            ..basic(n_train, n_val, n_test, seed)
        }
    }

    /// Relation is `<head type>-<tail type>` over three entity types that
    /// fill either argument in either order, so an argument's type is only
    /// recoverable from where it sits.
    pub fn typed(n_train: usize, n_val: usize, n_test: usize, seed: u64) -> SynthConfig {
        let all = entity_lexicons();
        let lexicons: BTreeMap<String, Lexicon> =
            ["PER", "ORG", "LOC"].iter().map(|k| (k.to_string(), all[*k].clone())).collect();
        let mut templates = Vec::new();
        for a in ["PER", "ORG", "LOC"] {
            for b in ["PER", "ORG", "LOC"] {
                let skeletons = [
                    format!("[{a}]/_/_/2/nsubj met/VBD/O/0/ROOT [{b}]/_/_/2/dobj"),
                    format!("[{a}]/_/_/2/nsubj joined/VBD/O/0/ROOT with/IN/O/2/prep [{b}]/_/_/3/pobj"),
                ];
                for (k, sk) in skeletons.iter().enumerate() {
                    let last = if k == 0 { 2 } else { 3 };
                    templates.push(template(&format!("{a}-{b}-{k}"), sk, 0, last, "{head}-{tail}"));
                    templates.push(template(&format!("{b}-{a}-{k}r"), sk, last, 0, "{head}-{tail}"));
                }
            }
        }
        SynthConfig {
            n_train,
            n_val,
            n_test,
            templates,
            lexicons,
            padding: Some(Padding {
                max_clauses: 3,
                chain_prob: 0.3,
            }),
            negative_label: None,
            seed,
        }
    }

    pub fn by_name(name: &str, n_train: usize, n_val: usize, n_test: usize, seed: u64) -> Result<SynthConfig> {
        match name {
            "basic" => Ok(basic(n_train, n_val, n_test, seed)),
            "varied" => Ok(varied(n_train, n_val, n_test, seed)),
            "typed" => Ok(typed(n_train, n_val, n_test, seed)),
            other => Err(Error::Config(format!(
                "unknown synthetic preset `{other}` (expected basic, varied or typed)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_corpus;

    #[test]
    fn basic_corpus_is_valid_and_sized() {
        let c = generate(&presets::basic(64, 8, 8, 1)).unwrap();
        assert_eq!((c.train.len(), c.validation.len(), c.test.len()), (64, 8, 8));
        assert!(c.sentences().all(|s| validate_sentence(s).is_empty()));
        assert_eq!(c.label_inventory.len(), 7);
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = presets::varied(30, 5, 5, 7);
        let dir = |n: &str| std::env::temp_dir().join(format!("relprobe-synth-{n}-{}", std::process::id()));
        write_corpus(&dir("a"), &generate(&cfg).unwrap()).unwrap();
        write_corpus(&dir("b"), &generate(&cfg).unwrap()).unwrap();
        for f in ["train.jsonl", "dev.jsonl", "test.jsonl"] {
            assert_eq!(
                std::fs::read(dir("a").join(f)).unwrap(),
                std::fs::read(dir("b").join(f)).unwrap()
            );
        }
    }

    #[test]
    fn title_template_relation() {
        let mut cfg = presets::basic(1, 0, 0, 3);
        cfg.templates.retain(|t| t.id == "title");
        let c = generate(&cfg).unwrap();
        let s = &c.train[0];
        assert_eq!(s.relation, "per:title");
        assert_eq!(s.ner[s.tail.start], "TITLE");
    }

    #[test]
    fn multi_word_filler_expands_with_compound() {
        let mut cfg = presets::basic(1, 0, 0, 0);
        cfg.templates.retain(|t| t.id == "works-for");
        cfg.lexicons.get_mut("PER").unwrap().words = vec!["Anna Berg".into()];
        let s = &generate(&cfg).unwrap().train[0];
        assert_eq!(s.tokens[..3], ["Anna", "Berg", "works"]);
        assert_eq!(s.head, Span::new(0, 1));
        assert_eq!(s.dep_head[..3], [2, 3, 0]);
        assert_eq!(s.dep_label[0], "compound");
    }

    #[test]
    fn order_controlled_pairs_share_multisets() {
        let c = generate_order_controlled(&presets::basic(100, 0, 0, 5), 5).unwrap();
        assert_eq!(c.train.len(), 200);
        let mut head_first = 0;
        for pair in c.train.chunks(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let mut ta = a.tokens.clone();
            let mut tb = b.tokens.clone();
            ta.sort();
            tb.sort();
            assert_eq!(ta, tb);
            assert_eq!(a.tokens[a.head.indices()], b.tokens[b.head.indices()]);
            assert_ne!(a.head.end < a.tail.start, b.head.end < b.tail.start);
            head_first += (a.head.end < a.tail.start) as usize + (b.head.end < b.tail.start) as usize;
        }
        assert_eq!(head_first, 100);
    }

    #[test]
    fn missing_lexicon_names_slot() {
        let mut cfg = presets::basic(4, 0, 0, 0);
        cfg.lexicons.remove("TITLE");
        let err = generate(&cfg).unwrap_err().to_string();
        assert!(err.contains("`TITLE`"), "{err}");
    }

    #[test]
    fn typed_relation_follows_argument_types() {
        let c = generate(&presets::typed(60, 10, 10, 2)).unwrap();
        for s in c.sentences() {
            let ty = |span: Span| match s.ner[span.end].as_str() {
                "PERSON" => "PER",
                "ORGANIZATION" => "ORG",
                _ => "LOC",
            };
            assert_eq!(s.relation, format!("{}-{}", ty(s.head), ty(s.tail)));
        }
    }

    #[test]
    fn padding_varies_length() {
        let c = generate(&presets::varied(300, 0, 0, 11)).unwrap();
        let lengths: std::collections::BTreeSet<usize> = c.train.iter().map(|s| s.len()).collect();
        assert!(lengths.len() > 40, "{}", lengths.len());
    }
}
