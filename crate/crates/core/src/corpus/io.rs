use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use super::{validate_sentence, Corpus, Sentence, Span};
use crate::error::{Error, Result};

/// On-disk layout of a corpus directory.
///
/// `GenericJsonl` reads `train.jsonl`, `dev.jsonl` and `test.jsonl` with one
/// flat record per line. `TacredJson` reads `train.json`, `dev.json` and
/// `test.json`, each holding one JSON array in the TACRED release schema.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    GenericJsonl,
    TacredJson,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic-jsonl" => Ok(Self::GenericJsonl),
            "tacred-json" => Ok(Self::TacredJson),
            other => Err(Error::Config(format!("unknown corpus format `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    /// Overrides the negative label. Without it, TACRED uses `no_relation`
    /// and generic corpora use `no_relation` or `Other` when present.
    pub negative_label: Option<String>,
    /// Seed for carving a validation split out of train when no dev file
    /// exists.
    pub validation_seed: u64,
    pub validation_fraction: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            negative_label: None,
            validation_seed: 13,
            validation_fraction: 0.1,
        }
    }
}

pub fn load_corpus(dir: &Path, format: CorpusFormat, opts: &LoadOptions) -> Result<Corpus> {
    let ext = match format {
        CorpusFormat::GenericJsonl => "jsonl",
        CorpusFormat::TacredJson => "json",
    };
    let file = |stem: &str| dir.join(format!("{stem}.{ext}"));
    let read = |path: &Path| match format {
        CorpusFormat::GenericJsonl => read_jsonl(path),
        CorpusFormat::TacredJson => read_tacred(path),
    };
    let mut train = read(&file("train"))?;
    let dev_path = [file("dev"), file("validation")].into_iter().find(|p| p.exists());
    let validation = match dev_path {
        Some(p) => read(&p)?,
        None => carve_validation(&mut train, opts),
    };
    let test_path = file("test");
    let test = if test_path.exists() { read(&test_path)? } else { Vec::new() };

    let negative = opts.negative_label.clone().or_else(|| {
        let candidates: &[&str] = match format {
            CorpusFormat::TacredJson => &["no_relation"],
            CorpusFormat::GenericJsonl => &["no_relation", "Other"],
        };
        candidates
            .iter()
            .find(|c| train.iter().any(|s| s.relation == **c))
            .map(|c| c.to_string())
    });
    Corpus::new(train, validation, test, negative)
}

/// Seeded shuffle of train, then the last `fraction` becomes validation.
fn carve_validation(train: &mut Vec<Sentence>, opts: &LoadOptions) -> Vec<Sentence> {
    let n_val = (train.len() as f64 * opts.validation_fraction).round() as usize;
    if n_val == 0 {
        return Vec::new();
    }
    train.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.validation_seed));
    train.split_off(train.len() - n_val)
}

/// Writes the generic-jsonl layout.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (stem, sentences) in [
        ("train", &corpus.train),
        ("dev", &corpus.validation),
        ("test", &corpus.test),
    ] {
        let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.jsonl")))?);
        for s in sentences {
            serde_json::to_writer(&mut w, &to_record(s))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    Ok(())
}

pub(crate) fn to_record(s: &Sentence) -> Value {
    json!({
        "id": s.id,
        "tokens": s.tokens,
        "pos": s.pos,
        "ner": s.ner,
        "dep_head": s.dep_head,
        "dep_label": s.dep_label,
        "head_start": s.head.start,
        "head_end": s.head.end,
        "tail_start": s.tail.start,
        "tail_end": s.tail.end,
        "relation": s.relation,
    })
}

fn read_jsonl(path: &Path) -> Result<Vec<Sentence>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("{}:{}", path.display(), i + 1);
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            location: loc.clone(),
            field: "<record>".into(),
            message: e.to_string(),
        })?;
        out.push(parse_record(&value, &loc, &GENERIC_FIELDS)?);
    }
    Ok(out)
}

fn read_tacred(path: &Path) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}", path.display(), e.line()),
        field: "<array>".into(),
        message: e.to_string(),
    })?;
    let Value::Array(records) = value else {
        return Err(Error::Parse {
            location: path.display().to_string(),
            field: "<array>".into(),
            message: "expected a JSON array of records".into(),
        });
    };
    records
        .iter()
        .enumerate()
        .map(|(i, r)| parse_record(r, &format!("{} record {}", path.display(), i + 1), &TACRED_FIELDS))
        .collect()
}

struct FieldNames {
    id: &'static str,
    tokens: &'static str,
    pos: &'static str,
    ner: &'static str,
    dep_head: &'static str,
    dep_label: &'static str,
    head_start: &'static str,
    head_end: &'static str,
    tail_start: &'static str,
    tail_end: &'static str,
    relation: &'static str,
}

const GENERIC_FIELDS: FieldNames = FieldNames {
    id: "id",
    tokens: "tokens",
    pos: "pos",
    ner: "ner",
    dep_head: "dep_head",
    dep_label: "dep_label",
    head_start: "head_start",
    head_end: "head_end",
    tail_start: "tail_start",
    tail_end: "tail_end",
    relation: "relation",
};

// TACRED spans are already 0-based and inclusive.
const TACRED_FIELDS: FieldNames = FieldNames {
    id: "id",
    tokens: "token",
    pos: "stanford_pos",
    ner: "stanford_ner",
    dep_head: "stanford_head",
    dep_label: "stanford_deprel",
    head_start: "subj_start",
    head_end: "subj_end",
    tail_start: "obj_start",
    tail_end: "obj_end",
    relation: "relation",
};

fn parse_record(value: &Value, loc: &str, names: &FieldNames) -> Result<Sentence> {
    let Value::Object(obj) = value else {
        return Err(field_err(loc, "<record>", "expected a JSON object"));
    };
    let s = Sentence {
        id: string(obj, names.id, loc)?,
        tokens: strings(obj, names.tokens, loc)?,
        pos: strings(obj, names.pos, loc)?,
        ner: strings(obj, names.ner, loc)?,
        dep_head: indices(obj, names.dep_head, loc)?,
        dep_label: strings(obj, names.dep_label, loc)?,
        head: Span::new(index(obj, names.head_start, loc)?, index(obj, names.head_end, loc)?),
        tail: Span::new(index(obj, names.tail_start, loc)?, index(obj, names.tail_end, loc)?),
        relation: string(obj, names.relation, loc)?,
    };
    if let Some(v) = validate_sentence(&s).into_iter().next() {
        return Err(Error::Invalid {
            id: s.id,
            violation: v,
        });
    }
    Ok(s)
}

fn field_err(loc: &str, field: &str, message: &str) -> Error {
    Error::Parse {
        location: loc.to_string(),
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn get<'a>(obj: &'a Map<String, Value>, field: &str, loc: &str) -> Result<&'a Value> {
    obj.get(field).ok_or_else(|| field_err(loc, field, "missing"))
}

fn string(obj: &Map<String, Value>, field: &str, loc: &str) -> Result<String> {
    match get(obj, field, loc)? {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(field_err(loc, field, "expected a string")),
    }
}

fn strings(obj: &Map<String, Value>, field: &str, loc: &str) -> Result<Vec<String>> {
    let Value::Array(items) = get(obj, field, loc)? else {
        return Err(field_err(loc, field, "expected an array of strings"));
    };
    items
        .iter()
        .map(|v| match v {
            Value::String(s) => Ok(s.clone()),
            _ => Err(field_err(loc, field, "expected an array of strings")),
        })
        .collect()
}

fn as_index(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|n| n as usize),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

fn index(obj: &Map<String, Value>, field: &str, loc: &str) -> Result<usize> {
    as_index(get(obj, field, loc)?).ok_or_else(|| field_err(loc, field, "expected a non-negative integer"))
}

fn indices(obj: &Map<String, Value>, field: &str, loc: &str) -> Result<Vec<usize>> {
    let Value::Array(items) = get(obj, field, loc)? else {
        return Err(field_err(loc, field, "expected an array of integers"));
    };
    items
        .iter()
        .map(|v| as_index(v).ok_or_else(|| field_err(loc, field, "expected an array of integers")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::bayer;
    use std::path::PathBuf;

    fn tmpdir(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("relprobe-io-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn reads_generic_record() {
        let d = tmpdir("generic");
        let mut line = serde_json::to_string(&to_record(&bayer())).unwrap();
        line.push('\n');
        fs::write(d.join("train.jsonl"), &line).unwrap();
        fs::write(d.join("dev.jsonl"), "").unwrap();
        let c = load_corpus(&d, CorpusFormat::GenericJsonl, &LoadOptions::default()).unwrap();
        assert_eq!(c.train.len(), 1);
        assert_eq!(c.train[0].len(), 3);
        assert_eq!(c.train[0], bayer());
        assert_eq!(c.label_inventory, vec!["org:subsidiaries"]);
    }

    #[test]
    fn inverted_span_is_rejected() {
        let d = tmpdir("inverted");
        let mut rec = to_record(&bayer());
        rec["head_start"] = json!(2);
        rec["head_end"] = json!(1);
        fs::write(d.join("train.jsonl"), format!("{rec}\n")).unwrap();
        let err = load_corpus(&d, CorpusFormat::GenericJsonl, &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("span start > end"), "{err}");
        assert!(err.to_string().contains("s1"));
    }

    #[test]
    fn malformed_field_reports_line_and_field() {
        let d = tmpdir("malformed");
        let good = to_record(&bayer());
        let mut bad = to_record(&bayer());
        bad["id"] = json!("s2");
        bad["tokens"] = json!("not a list");
        fs::write(d.join("train.jsonl"), format!("{good}\n{bad}\n")).unwrap();
        let err = load_corpus(&d, CorpusFormat::GenericJsonl, &LoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("train.jsonl:2") && msg.contains("`tokens`"), "{msg}");
    }

    #[test]
    fn reads_tacred_schema() {
        let d = tmpdir("tacred");
        let rec = json!([{
            "id": "t1", "relation": "no_relation",
            "token": ["Bayer", "acquired", "Monsanto"],
            "subj_start": 0, "subj_end": 0, "obj_start": 2, "obj_end": 2,
            "subj_type": "ORGANIZATION", "obj_type": "ORGANIZATION",
            "stanford_pos": ["NNP", "VBD", "NNP"],
            "stanford_ner": ["ORGANIZATION", "O", "ORGANIZATION"],
            "stanford_head": [2, 0, 2],
            "stanford_deprel": ["nsubj", "ROOT", "dobj"]
        }]);
        fs::write(d.join("train.json"), rec.to_string()).unwrap();
        let c = load_corpus(&d, CorpusFormat::TacredJson, &LoadOptions::default()).unwrap();
        assert_eq!(c.negative_label.as_deref(), Some("no_relation"));
        assert_eq!(c.train[0].head, Span::new(0, 0));
        assert_eq!(c.train[0].tail, Span::new(2, 2));
    }

    #[test]
    fn missing_dev_file_carves_a_tenth_of_train() {
        let d = tmpdir("carve");
        let mut text = String::new();
        for i in 0..20 {
            let mut s = bayer();
            s.id = format!("s{i}");
            text.push_str(&format!("{}\n", to_record(&s)));
        }
        fs::write(d.join("train.jsonl"), text).unwrap();
        let opts = LoadOptions::default();
        let c = load_corpus(&d, CorpusFormat::GenericJsonl, &opts).unwrap();
        assert_eq!((c.train.len(), c.validation.len()), (18, 2));
        let again = load_corpus(&d, CorpusFormat::GenericJsonl, &opts).unwrap();
        assert_eq!(c, again);
    }
}
