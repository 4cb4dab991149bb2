//! `relprobe`: synthesize or load relation-extraction corpora, train
//! encoders, extract frozen representations and run probing suites.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Settings;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration; exit status 2.
    Usage(String),
    /// The command ran but failed, including invalid inputs; exit status 1.
    Failure(String),
}

impl From<relprobe_core::Error> for CliError {
    fn from(e: relprobe_core::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<relprobe_autodiff::AutodiffError> for CliError {
    fn from(e: relprobe_autodiff::AutodiffError) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "relprobe", version, about = "Probe what relation-extraction encoders learn")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus, check every record and print a summary.
    Validate(ValidateArgs),
    /// Generate a synthetic annotated corpus.
    Synth(SynthArgs),
    /// Derive probing-task datasets from a corpus.
    Probegen(ProbegenArgs),
    /// Train a relation-extraction model.
    Train(TrainArgs),
    /// Extract frozen representations (or baseline features) to a matrix file.
    Extract(ExtractArgs),
    /// Fit one probe on a representation matrix and a task dataset.
    Probe(ProbeArgs),
    /// Train, extract and probe everything a run config names.
    Suite(SuiteArgs),
    /// Compare analytic and numeric gradients.
    Gradcheck(GradcheckArgs),
    /// Render CSV reports as aligned text tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus directory with train/dev/test files.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// generic-jsonl or tacred-json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    negative_label: Option<String>,
}

impl CorpusArgs {
    fn apply(self, s: &mut Settings) {
        s.flag("corpus", self.corpus.map(|p| p.display().to_string()))
            .flag("format", self.format)
            .flag("negative_label", self.negative_label);
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Also write the summary here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// basic, varied or typed.
    #[arg(long)]
    preset: Option<String>,
    /// JSONL template file replacing the preset's templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Emit argument-order-swapped pairs.
    #[arg(long)]
    order_controlled: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbegenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// tacred, semeval or custom:SL,AD,TD,SD.
    #[arg(long)]
    profile: Option<String>,
    /// Single task; all tasks of the profile when omitted.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Hyperparameter preset, e.g. tacred-cnn or desk-small.
    #[arg(long)]
    preset: Option<String>,
    /// cnn, bilstm, gcn, attn or boe.
    #[arg(long)]
    encoder: Option<String>,
    /// Word-vector text file.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Per-token contextual vectors (CTXV file).
    #[arg(long)]
    contextual: Option<PathBuf>,
    /// Replace mentions by role and type tokens.
    #[arg(long)]
    masking: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Trained model; omit when extracting a baseline.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// length, argdist or boe.
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Width of random vectors for the BoE baseline without an embeddings file.
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    contextual: Option<PathBuf>,
    /// train, validation, test or all.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Representation matrix file.
    #[arg(long)]
    reps: Option<PathBuf>,
    /// Task dataset written by `probegen`.
    #[arg(long)]
    task: Option<PathBuf>,
    /// Comma-separated l2 values.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Synthetic preset used when no corpus directory is given.
    #[arg(long)]
    synth: Option<String>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated encoder kinds.
    #[arg(long)]
    encoders: Option<String>,
    /// Comma-separated baselines.
    #[arg(long)]
    baselines: Option<String>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    masking: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Probe worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Check every op and every encoder.
    #[arg(long)]
    all: bool,
    /// Only checks whose name contains this.
    #[arg(long)]
    only: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV files to render.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn path_str(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(a) => {
            let mut s = Settings::load(a.config.as_deref(), commands::VALIDATE_KEYS)?;
            a.corpus.apply(&mut s);
            s.flag("out", path_str(a.out));
            commands::validate(&s)
        }
        Command::Synth(a) => {
            let mut s = Settings::load(a.config.as_deref(), commands::SYNTH_KEYS)?;
            s.flag("preset", a.preset)
                .flag("templates", path_str(a.templates))
                .flag("n_train", a.n_train)
                .flag("n_val", a.n_val)
                .flag("n_test", a.n_test)
                .flag("seed", a.seed)
                .switch("order_controlled", a.order_controlled)
                .flag("out", path_str(a.out));
            commands::synth(&s)
        }
        Command::Probegen(a) => {
            let mut s = Settings::load(a.config.as_deref(), commands::PROBEGEN_KEYS)?;
            a.corpus.apply(&mut s);
            s.flag("profile", a.profile).flag("task", a.task).flag("out", path_str(a.out));
            commands::probegen(&s)
        }
        Command::Train(a) => {
            let mut s = Settings::load(a.config.as_deref(), commands::TRAIN_KEYS)?;
            a.corpus.apply(&mut s);
            s.flag("preset", a.preset)
                .flag("encoder", a.encoder)
                .flag("embeddings", path_str(a.embeddings))
                .flag("contextual", path_str(a.contextual))
                .switch("masking", a.masking)
                .flag("epochs", a.epochs)
                .flag("batch_size", a.batch_size)
                .flag("lr", a.lr)
                .flag("seed", a.seed)
                .flag("out", path_str(a.out));
            commands::train(&s)
        }
        Command::Extract(a) => {
            let mut s = Settings::load(a.config.as_deref(), commands::EXTRACT_KEYS)?;
            a.corpus.apply(&mut s);
            s.flag("checkpoint", path_str(a.checkpoint))
                .flag("baseline", a.baseline)
                .flag("embeddings", path_str(a.embeddings))
                .flag("embedding_dim", a.embedding_dim)
                .flag("contextual", path_str(a.contextual))
                .flag("split", a.split)
                .flag("seed", a.seed)
                .flag("out", path_str(a.out));
            commands::extract(&s)
        }
        Command::Probe(a) => {
            let mut s = Settings::load(a.config.as_deref(), commands::PROBE_KEYS)?;
            s.flag("reps", path_str(a.reps))
                .flag("task", path_str(a.task))
                .flag("grid", a.grid)
                .switch("standardize", a.standardize)
                .flag("out", path_str(a.out));
            commands::probe(&s)
        }
        Command::Suite(a) => {
            let mut s = Settings::load(a.config.as_deref(), commands::SUITE_KEYS)?;
            a.corpus.apply(&mut s);
            s.flag("synth", a.synth)
                .flag("n_train", a.n_train)
                .flag("n_val", a.n_val)
                .flag("n_test", a.n_test)
                .flag("profile", a.profile)
                .flag("preset", a.preset)
                .flag("encoders", a.encoders)
                .flag("baselines", a.baselines)
                .flag("embeddings", path_str(a.embeddings))
                .flag("embedding_dim", a.embedding_dim)
                .switch("masking", a.masking)
                .flag("epochs", a.epochs)
                .flag("grid", a.grid)
                .switch("standardize", a.standardize)
                .flag("seed", a.seed)
                .flag("jobs", a.jobs)
                .flag("out", path_str(a.out));
            commands::suite(&s)
        }
        Command::Gradcheck(a) => {
            if !a.all && a.only.is_none() {
                return Err(CliError::Usage("pass --all or --only NAME".into()));
            }
            commands::gradcheck(a.only.as_deref(), a.out.as_deref())
        }
        Command::Report(a) => commands::report(&a.inputs, a.out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
