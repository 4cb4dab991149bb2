use std::fs;
use std::path::{Path, PathBuf};

use relprobe_autodiff::checks::op_gradchecks;
use relprobe_core::corpus::{
    load_contextual, load_corpus, load_embeddings, write_corpus, ContextualStore, Corpus, CorpusFormat,
    EmbeddingTable, LoadOptions, Sentence, Split,
};
use relprobe_core::encoders::checks::encoder_gradchecks;
use relprobe_core::encoders::{EncoderKind, Model};
use relprobe_core::probegen::{build_all, build_task, read_dataset, write_dataset, TaskId, TaskProfile};
use relprobe_core::probing::{
    baseline_reps, checkpoint_source, extract_reps, render_table, run_suite, train_probe, BaselineKind,
    ProbeOptions, RepMatrix, SuiteSource, DEFAULT_GRID,
};
use relprobe_core::synth::{generate, generate_order_controlled, load_templates, presets};
use relprobe_core::training::{preset, train_re, Preset};

use crate::config::Settings;
use crate::CliError;

macro_rules! keys {
    ($($k:literal),* $(,)?) => {
        &[$($k),*]
    };
}

pub const VALIDATE_KEYS: &[&str] = keys!["corpus", "format", "negative_label", "out"];
pub const SYNTH_KEYS: &[&str] = keys!["preset", "templates", "n_train", "n_val", "n_test", "seed", "order_controlled", "out"];
pub const PROBEGEN_KEYS: &[&str] = keys!["corpus", "format", "negative_label", "profile", "task", "out"];
pub const TRAIN_KEYS: &[&str] = keys![
    "corpus", "format", "negative_label", "preset", "encoder", "embeddings", "contextual", "masking", "epochs",
    "batch_size", "lr", "seed", "out",
];
pub const EXTRACT_KEYS: &[&str] = keys![
    "corpus", "format", "negative_label", "checkpoint", "baseline", "embeddings", "embedding_dim", "contextual",
    "split", "seed", "out",
];
pub const PROBE_KEYS: &[&str] = keys!["reps", "task", "grid", "standardize", "out"];
pub const SUITE_KEYS: &[&str] = keys![
    "corpus", "format", "negative_label", "synth", "n_train", "n_val", "n_test", "profile", "preset", "encoders",
    "baselines", "embeddings", "embedding_dim", "masking", "epochs", "grid", "standardize", "seed", "jobs", "out",
];

const DEFAULT_SEED: u64 = 1;
const DEFAULT_EMBEDDING_DIM: usize = 50;

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    print!("{text}");
    match out {
        Some(p) => write_text(p, text),
        None => Ok(()),
    }
}

fn load_settings_corpus(s: &Settings) -> Result<Corpus, CliError> {
    let dir = s.path("corpus")?;
    let format: CorpusFormat = s.or("format", CorpusFormat::GenericJsonl)?;
    let opts = LoadOptions {
        negative_label: s.get("negative_label")?,
        ..LoadOptions::default()
    };
    Ok(load_corpus(&dir, format, &opts)?)
}

fn corpus_summary(c: &Corpus) -> String {
    let mut out = String::new();
    for split in Split::ALL {
        out.push_str(&format!("{:<11} {}\n", split.name(), c.split(split).len()));
    }
    out.push_str(&format!("labels      {}\n", c.label_inventory.len()));
    match &c.negative_label {
        Some(neg) => out.push_str(&format!("negative    {neg} ({:.3} of all)\n", c.negative_fraction())),
        None => out.push_str("negative    none\n"),
    }
    out
}

fn parse_split(s: &Settings) -> Result<Option<Split>, CliError> {
    match s.str("split").unwrap_or("all") {
        "all" => Ok(None),
        other => Ok(Some(other.parse().map_err(|e| CliError::Usage(format!("{e}")))?)),
    }
}

fn sentences_of(c: &Corpus, split: Option<Split>) -> Vec<Sentence> {
    match split {
        Some(sp) => c.split(sp).to_vec(),
        None => c.sentences().cloned().collect(),
    }
}

pub fn validate(s: &Settings) -> Result<(), CliError> {
    let corpus = load_settings_corpus(s)?;
    let text = format!("ok\n{}", corpus_summary(&corpus));
    emit(&text, s.get::<PathBuf>("out")?.as_deref())
}

pub fn synth(s: &Settings) -> Result<(), CliError> {
    let out = s.path("out")?;
    let seed = s.or("seed", DEFAULT_SEED)?;
    let mut cfg = presets::by_name(
        s.str("preset").unwrap_or("basic"),
        s.or("n_train", 1000)?,
        s.or("n_val", 100)?,
        s.or("n_test", 100)?,
        seed,
    )?;
    if let Some(path) = s.get::<PathBuf>("templates")? {
        cfg.templates = load_templates(&path)?;
    }
    let corpus = if s.bool("order_controlled")? {
        generate_order_controlled(&cfg, seed)?
    } else {
        generate(&cfg)?
    };
    write_corpus(&out, &corpus)?;
    print!("{}", corpus_summary(&corpus));
    Ok(())
}

pub fn probegen(s: &Settings) -> Result<(), CliError> {
    let corpus = load_settings_corpus(s)?;
    let profile: TaskProfile = s.or("profile", TaskProfile::Tacred)?;
    let out = s.path("out")?;
    let datasets = match s.get::<TaskId>("task")? {
        Some(task) => vec![build_task(task, &corpus, &profile)?],
        None => build_all(&corpus, &profile)?,
    };
    fs::create_dir_all(&out)?;
    for ds in &datasets {
        write_dataset(&out.join(format!("{}.jsonl", ds.task.name())), ds)?;
        let counts = ds.train_counts();
        println!("{:<13} {} labels, train counts {:?}", ds.task.name(), ds.labels.len(), counts);
    }
    Ok(())
}

/// Named preset for `kind`; dataset bases such as `tacred` get the encoder
/// suffix appended.
fn resolve_preset(name: &str, kind: Option<EncoderKind>) -> Result<Preset, CliError> {
    let full = match (name, kind) {
        ("tacred" | "semeval", Some(k)) => format!("{name}-{k}"),
        _ => name.to_string(),
    };
    Ok(preset(&full, kind)?)
}

fn apply_overrides(p: &mut Preset, s: &Settings) -> Result<(), CliError> {
    if let Some(e) = s.get("epochs")? {
        p.profile.epochs = e;
    }
    if let Some(b) = s.get("batch_size")? {
        p.profile.batch_size = b;
    }
    if let Some(lr) = s.get("lr")? {
        p.profile.lr = lr;
    }
    if s.bool("masking")? {
        p.input.masking = true;
    }
    Ok(())
}

pub fn train(s: &Settings) -> Result<(), CliError> {
    let corpus = load_settings_corpus(s)?;
    let out = s.path("out")?;
    let kind = s.get::<EncoderKind>("encoder")?;
    let mut p = resolve_preset(s.str("preset").unwrap_or("desk-small"), kind)?;
    apply_overrides(&mut p, s)?;
    let table = match s.get::<PathBuf>("embeddings")? {
        Some(path) => Some(load_embeddings(&path, p.input.word_dim)?),
        None => None,
    };
    let ctx = match s.get::<PathBuf>("contextual")? {
        Some(path) => {
            let store = load_contextual(&path)?;
            p.input.use_contextual = true;
            p.input.contextual_dim = store.dim().unwrap_or(0);
            Some(store)
        }
        None => None,
    };
    let seed = s.or("seed", DEFAULT_SEED)?;
    let (model, history) = train_re(&corpus, &p.input, &p.encoder, &p.profile, table.as_ref(), ctx.as_ref(), seed)?;
    fs::create_dir_all(&out)?;
    model.save(&out.join("model.rpck"))?;
    history.write_csv(&out.join("history.csv"))?;
    println!(
        "{} trained for {} epochs, best epoch {}, best validation F1 {:.4}",
        model.kind(),
        history.epochs.len(),
        history.best_epoch,
        history.best_val_f1()
    );
    Ok(())
}

fn boe_table(s: &Settings, corpus: &Corpus, seed: u64) -> Result<EmbeddingTable, CliError> {
    let dim = s.or("embedding_dim", DEFAULT_EMBEDDING_DIM)?;
    match s.get::<PathBuf>("embeddings")? {
        Some(path) => Ok(load_embeddings(&path, dim)?),
        None => Ok(EmbeddingTable::random(
            corpus.sentences().flat_map(|x| x.tokens.iter().map(String::as_str)),
            dim,
            seed,
        )),
    }
}

fn baseline_matrix(
    kind: BaselineKind,
    s: &Settings,
    corpus: &Corpus,
    sentences: &[Sentence],
    seed: u64,
) -> Result<RepMatrix, CliError> {
    let table = match kind {
        BaselineKind::Boe => Some(boe_table(s, corpus, seed)?),
        _ => None,
    };
    Ok(baseline_reps(kind, sentences, table.as_ref())?)
}

fn load_ctx(s: &Settings) -> Result<Option<ContextualStore>, CliError> {
    match s.get::<PathBuf>("contextual")? {
        Some(path) => Ok(Some(load_contextual(&path)?)),
        None => Ok(None),
    }
}

pub fn extract(s: &Settings) -> Result<(), CliError> {
    let corpus = load_settings_corpus(s)?;
    let out = s.path("out")?;
    let sentences = sentences_of(&corpus, parse_split(s)?);
    let seed = s.or("seed", DEFAULT_SEED)?;
    let reps = match (s.get::<PathBuf>("checkpoint")?, s.get::<BaselineKind>("baseline")?) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either checkpoint or baseline, not both".into())),
        (None, None) => return Err(CliError::Usage("missing `checkpoint` or `baseline`".into())),
        (Some(path), None) => {
            let model = Model::load(&path)?;
            let ctx = load_ctx(s)?;
            extract_reps(&model, &sentences, ctx.as_ref(), &checkpoint_source(&path)?)?
        }
        (None, Some(kind)) => baseline_matrix(kind, s, &corpus, &sentences, seed)?,
    };
    reps.write(&out)?;
    println!("{} rows x {} dims from {}, sha256 {}", reps.len(), reps.dim(), reps.source(), reps.hash());
    Ok(())
}

fn grid(s: &Settings) -> Result<Vec<f64>, CliError> {
    let g: Vec<f64> = s.list("grid")?;
    Ok(if g.is_empty() { DEFAULT_GRID.to_vec() } else { g })
}

pub fn probe(s: &Settings) -> Result<(), CliError> {
    let reps = RepMatrix::read(&s.path("reps")?)?;
    let task = read_dataset(&s.path("task")?)?;
    let opts = ProbeOptions {
        standardize: s.bool("standardize")?,
        ..ProbeOptions::default()
    };
    let r = train_probe(&reps, &task, &grid(s)?, &opts)?;
    let text = format!(
        "source,task,chosen_l2,val_accuracy,test_accuracy,epochs\n{},{},{},{:.4},{:.4},{}\n",
        reps.source(),
        r.task,
        r.chosen_l2,
        r.val_accuracy,
        r.test_accuracy,
        r.epochs
    );
    emit(&text, s.get::<PathBuf>("out")?.as_deref())
}

pub fn suite(s: &Settings) -> Result<(), CliError> {
    let out = s.path("out")?;
    let seed = s.or("seed", DEFAULT_SEED)?;
    let corpus = match (s.get::<PathBuf>("corpus")?, s.str("synth")) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either corpus or synth, not both".into())),
        (Some(_), None) => load_settings_corpus(s)?,
        (None, Some(name)) => {
            let cfg = presets::by_name(name, s.or("n_train", 1000)?, s.or("n_val", 100)?, s.or("n_test", 100)?, seed)?;
            let c = generate(&cfg)?;
            write_corpus(&out.join("corpus"), &c)?;
            c
        }
        (None, None) => return Err(CliError::Usage("missing `corpus` or `synth`".into())),
    };
    let profile: TaskProfile = s.or("profile", TaskProfile::Tacred)?;
    let preset_name = s.str("preset").unwrap_or("desk-small").to_string();
    let mut encoders: Vec<EncoderKind> = s.list("encoders")?;
    if s.str("encoders").is_none() {
        encoders = vec![EncoderKind::Cnn];
    }
    let baselines: Vec<BaselineKind> = match s.str("baselines") {
        None => BaselineKind::ALL.to_vec(),
        Some(_) => s.list("baselines")?,
    };
    let standardize_all = s.bool("standardize")?;
    let all = sentences_of(&corpus, None);

    let tasks = build_all(&corpus, &profile)?;
    fs::create_dir_all(out.join("tasks"))?;
    for ds in &tasks {
        write_dataset(&out.join("tasks").join(format!("{}.jsonl", ds.task.name())), ds)?;
    }

    fs::create_dir_all(out.join("models"))?;
    fs::create_dir_all(out.join("reps"))?;
    let mut sources = Vec::new();
    for kind in encoders {
        let mut p = resolve_preset(&preset_name, Some(kind))?;
        apply_overrides(&mut p, s)?;
        let (model, history) = train_re(&corpus, &p.input, &p.encoder, &p.profile, None, None, seed)?;
        let ckpt = out.join("models").join(format!("{kind}.rpck"));
        model.save(&ckpt)?;
        history.write_csv(&out.join("models").join(format!("{kind}_history.csv")))?;
        eprintln!("trained {kind}: {} epochs, best validation F1 {:.4}", history.epochs.len(), history.best_val_f1());
        let reps = extract_reps(&model, &all, None, &checkpoint_source(&ckpt)?)?;
        reps.write(&out.join("reps").join(format!("{kind}.bin")))?;
        sources.push(SuiteSource::new(kind.name(), reps));
    }
    for kind in baselines {
        let reps = baseline_matrix(kind, s, &corpus, &all, seed)?;
        reps.write(&out.join("reps").join(format!("{}.bin", kind.name().to_ascii_lowercase())))?;
        sources.push(SuiteSource::baseline(kind, reps));
    }
    for src in &mut sources {
        src.standardize |= standardize_all;
    }

    let jobs = s.or("jobs", 1usize)?.max(1);
    let report = run_suite(&sources, &tasks, &grid(s)?, &ProbeOptions::default(), jobs)?;
    write_text(&out.join("suite.csv"), &report.to_csv())?;
    write_text(&out.join("detail.csv"), &report.to_detail_csv())?;
    let table = report.to_table();
    write_text(&out.join("suite.txt"), &table)?;
    print!("{table}");
    Ok(())
}

/// Tolerance above which a gradient check fails.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn gradcheck(only: Option<&str>, out: Option<&Path>) -> Result<(), CliError> {
    let mut rows: Vec<(String, f64, usize)> = op_gradchecks()?
        .into_iter()
        .map(|(name, r)| (format!("op:{name}"), r.max_rel_error, r.checked))
        .collect();
    rows.extend(
        encoder_gradchecks()?
            .into_iter()
            .map(|(name, r)| (format!("encoder:{name}"), r.max_rel_error, r.checked)),
    );
    if let Some(pat) = only {
        rows.retain(|(name, _, _)| name.contains(pat));
        if rows.is_empty() {
            return Err(CliError::Usage(format!("no gradient check matches `{pat}`")));
        }
    }
    let mut text = String::from("check,max_rel_error,checked,status\n");
    let mut failed = 0;
    for (name, err, checked) in &rows {
        let ok = *err < GRADCHECK_TOLERANCE;
        failed += usize::from(!ok);
        text.push_str(&format!("{name},{err:.3e},{checked},{}\n", if ok { "ok" } else { "FAIL" }));
    }
    emit(&text, out)?;
    if failed > 0 {
        return Err(CliError::Failure(format!("{failed} gradient checks at or above {GRADCHECK_TOLERANCE:e}")));
    }
    Ok(())
}

pub fn report(inputs: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let mut text = String::new();
    for (i, path) in inputs.iter().enumerate() {
        let csv = fs::read_to_string(path)
            .map_err(|e| CliError::Failure(format!("cannot read {}: {e}", path.display())))?;
        if i > 0 {
            text.push('\n');
        }
        if inputs.len() > 1 {
            text.push_str(&format!("{}\n", path.display()));
        }
        text.push_str(&render_table(&csv));
    }
    emit(&text, out)
}
