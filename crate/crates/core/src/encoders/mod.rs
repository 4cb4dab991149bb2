//! Sentence encoders for relation extraction and the relation classifier.
//!
//! A [`Model`] bundles input embeddings, one encoder and a linear
//! classification layer in a single [`ParamStore`]. The forward pass is
//! generic over the scalar type so that the same code trains in `f32` and
//! is gradient-checked in `f64` (see [`Model::cast_params`]).

pub mod checks;
mod input;
mod nets;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relprobe_autodiff::{
    load_checkpoint, save_checkpoint, Checkpoint, Graph, Mode, NodeId, ParamId, ParamStore, Scalar, Tensor,
};
use serde::{Deserialize, Serialize};

use crate::corpus::{ContextMatrix, EmbeddingTable, Sentence};
use crate::deptree::DepTree;
use crate::error::{Error, Result};

pub use input::{embed_inputs, position_offsets, InputConfig, InputParams, Vocab, PAD, PAD_ID, UNK, UNK_ID};
pub use nets::{AttnParams, EncParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Cnn,
    Bilstm,
    Gcn,
    Attn,
    Boe,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Cnn => "cnn",
            EncoderKind::Bilstm => "bilstm",
            EncoderKind::Gcn => "gcn",
            EncoderKind::Attn => "attn",
            EncoderKind::Boe => "boe",
        }
    }
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn" => Ok(EncoderKind::Cnn),
            "bilstm" => Ok(EncoderKind::Bilstm),
            "gcn" => Ok(EncoderKind::Gcn),
            "attn" => Ok(EncoderKind::Attn),
            "boe" => Ok(EncoderKind::Boe),
            other => Err(Error::Config(format!("unknown encoder `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderConfig {
    Cnn {
        filters: usize,
        widths: Vec<usize>,
        activation: Activation,
    },
    Bilstm {
        layers: usize,
        hidden: usize,
    },
    Gcn {
        layers: usize,
        dim: usize,
        ff_layers: usize,
        /// Path-centric pruning radius; `None` keeps the whole tree.
        prune_k: Option<usize>,
    },
    Attn {
        layers: usize,
        heads: usize,
        kv_dim: usize,
        ff_dim: usize,
    },
    Boe,
}

impl EncoderConfig {
    pub fn kind(&self) -> EncoderKind {
        match self {
            EncoderConfig::Cnn { .. } => EncoderKind::Cnn,
            EncoderConfig::Bilstm { .. } => EncoderKind::Bilstm,
            EncoderConfig::Gcn { .. } => EncoderKind::Gcn,
            EncoderConfig::Attn { .. } => EncoderKind::Attn,
            EncoderConfig::Boe => EncoderKind::Boe,
        }
    }

    pub fn check(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{} {name} must be positive", self.kind())))
            } else {
                Ok(())
            }
        };
        match self {
            EncoderConfig::Cnn { filters, widths, .. } => {
                positive("filters", *filters)?;
                positive("widths", widths.len())?;
                for &w in widths {
                    positive("filter width", w)?;
                }
            }
            EncoderConfig::Bilstm { layers, hidden } => {
                positive("layers", *layers)?;
                positive("hidden", *hidden)?;
            }
            EncoderConfig::Gcn { layers, dim, .. } => {
                positive("layers", *layers)?;
                positive("dim", *dim)?;
            }
            EncoderConfig::Attn {
                layers,
                heads,
                kv_dim,
                ff_dim,
            } => {
                positive("layers", *layers)?;
                positive("heads", *heads)?;
                positive("kv_dim", *kv_dim)?;
                positive("ff_dim", *ff_dim)?;
                if kv_dim % heads != 0 {
                    return Err(Error::Config(format!("attn kv_dim {kv_dim} not divisible by {heads} heads")));
                }
            }
            EncoderConfig::Boe => {}
        }
        Ok(())
    }

    /// Width of the sentence representation for input width `d_in`.
    pub fn rep_dim(&self, d_in: usize) -> usize {
        match self {
            EncoderConfig::Cnn { filters, widths, .. } => filters * widths.len(),
            EncoderConfig::Bilstm { hidden, .. } => 2 * hidden,
            EncoderConfig::Gcn { dim, ff_layers, .. } => {
                if *ff_layers == 0 {
                    3 * dim
                } else {
                    *dim
                }
            }
            EncoderConfig::Attn { kv_dim, .. } => *kv_dim,
            EncoderConfig::Boe => d_in,
        }
    }
}

/// Dropout probabilities; zero disables each one.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dropouts {
    /// Probability of replacing a token with the unknown token.
    pub word: f64,
    pub embedding: f64,
    /// Applied to the sentence representation and between stacked layers.
    pub encoder: f64,
    /// Variational mask on LSTM hidden states.
    pub recurrent: f64,
    pub attention: f64,
}

/// Everything needed to rebuild a model; stored as JSON in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input: InputConfig,
    pub encoder: EncoderConfig,
    pub dropout: Dropouts,
    pub labels: Vec<String>,
    pub vocab: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Uniform(f64),
    Xavier,
    Zeros,
    Ones,
    /// Zeros except ones in the forget-gate block of an LSTM bias.
    LstmBias(usize),
}

#[derive(Clone, Debug)]
struct Layout {
    word: ParamId,
    pos_head: Option<ParamId>,
    pos_tail: Option<ParamId>,
    enc: EncParams,
    cls_w: ParamId,
    cls_b: ParamId,
}

/// Registers (or looks up) a parameter by name and shape.
type Register<'a> = dyn FnMut(&str, [usize; 2], Init) -> Result<ParamId> + 'a;

fn build_layout(cfg: &ModelConfig, reg: &mut Register<'_>) -> Result<Layout> {
    let inp = &cfg.input;
    let word = reg("embed.word", [cfg.vocab.len(), inp.word_dim], Init::Uniform(1.0))?;
    let (pos_head, pos_tail) = if inp.pos_dim > 0 {
        let rows = 2 * inp.max_offset + 1;
        (
            Some(reg("embed.pos_head", [rows, inp.pos_dim], Init::Uniform(1.0))?),
            Some(reg("embed.pos_tail", [rows, inp.pos_dim], Init::Uniform(1.0))?),
        )
    } else {
        (None, None)
    };
    let d_in = inp.width();
    let enc = nets::build(&cfg.encoder, d_in, reg)?;
    let rep = cfg.encoder.rep_dim(d_in);
    let cls_w = reg("cls.weight", [rep, cfg.labels.len()], Init::Xavier)?;
    let cls_b = reg("cls.bias", [1, cfg.labels.len()], Init::Zeros)?;
    Ok(Layout {
        word,
        pos_head,
        pos_tail,
        enc,
        cls_w,
        cls_b,
    })
}

fn init_tensor(shape: [usize; 2], init: Init, rng: &mut ChaCha8Rng) -> Tensor<f32> {
    let [r, c] = shape;
    let n = r * c;
    let uniform = |rng: &mut ChaCha8Rng, a: f64| -> Vec<f32> { (0..n).map(|_| rng.gen_range(-a..=a) as f32).collect() };
    let data = match init {
        Init::Uniform(a) => uniform(rng, a),
        Init::Xavier => uniform(rng, (6.0 / (r + c) as f64).sqrt()),
        Init::Zeros => vec![0.0; n],
        Init::Ones => vec![1.0; n],
        Init::LstmBias(h) => (0..n).map(|i| if (h..2 * h).contains(&i) { 1.0 } else { 0.0 }).collect(),
    };
    Tensor::matrix(r, c, data).expect("consistent init shape")
}

/// A relation-extraction model: embeddings, encoder, classifier.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore<f32>,
    vocab: Vocab,
    layout: Layout,
}

impl Model {
    /// Fresh parameters. Rows of the word table whose token occurs in
    /// `table` start from the pre-trained vector; the unknown row takes the
    /// table's unknown vector and the padding row is zero.
    pub fn new(config: ModelConfig, table: Option<&EmbeddingTable>, seed: u64) -> Result<Self> {
        config.input.check()?;
        config.encoder.check()?;
        if config.labels.is_empty() {
            return Err(Error::Config("model needs at least one relation label".into()));
        }
        if let Some(t) = table {
            if t.dim() != config.input.word_dim {
                return Err(Error::Config(format!(
                    "embedding table has width {} but word_dim is {}",
                    t.dim(),
                    config.input.word_dim
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let layout = build_layout(&config, &mut |name, shape, init| {
            Ok(params.add(name, init_tensor(shape, init, &mut rng))?)
        })?;
        let vocab = Vocab::from_tokens(config.vocab.clone());
        {
            let words = params.value_mut(layout.word);
            let d = config.input.word_dim;
            let data = words.data_mut();
            data[PAD_ID * d..(PAD_ID + 1) * d].fill(0.0);
            if let Some(t) = table {
                data[UNK_ID * d..(UNK_ID + 1) * d].copy_from_slice(t.unk_vector());
                for (i, tok) in vocab.tokens().iter().enumerate().skip(2) {
                    if let Some(v) = t.get(tok) {
                        data[i * d..(i + 1) * d].copy_from_slice(v);
                    }
                }
            }
        }
        if config.input.freeze_words {
            params.set_trainable(layout.word, false);
        }
        Ok(Self {
            config,
            params,
            vocab,
            layout,
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let config: ModelConfig = serde_json::from_str(&ckpt.config).map_err(|e| Error::Format {
            what: "checkpoint config",
            message: e.to_string(),
        })?;
        config.encoder.check()?;
        let params = ckpt.params;
        let layout = build_layout(&config, &mut |name, shape, _| {
            let id = params.id(name).ok_or_else(|| Error::Format {
                what: "checkpoint",
                message: format!("missing parameter {name}"),
            })?;
            if params.value(id).shape() != shape {
                return Err(Error::Format {
                    what: "checkpoint",
                    message: format!(
                        "parameter {name} has shape {:?}, config implies {:?}",
                        params.value(id).shape(),
                        shape
                    ),
                });
            }
            Ok(id)
        })?;
        let vocab = Vocab::from_tokens(config.vocab.clone());
        Ok(Self {
            config,
            params,
            vocab,
            layout,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(load_checkpoint(path)?)
    }

    pub fn config_json(&self) -> String {
        serde_json::to_string(&self.config).expect("model config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(save_checkpoint(path, &self.params, &self.config_json())?)
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn kind(&self) -> EncoderKind {
        self.config.encoder.kind()
    }

    pub fn rep_dim(&self) -> usize {
        self.config.encoder.rep_dim(self.config.input.width())
    }

    pub fn num_labels(&self) -> usize {
        self.config.labels.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.config.labels.iter().position(|l| l == label)
    }

    /// Parameter copy in another precision; ids stay valid for this model.
    pub fn cast_params<T: Scalar>(&self) -> ParamStore<T> {
        self.params.cast()
    }

    /// Sentence representation as a `1 × rep_dim` node. The graph's store
    /// must be this model's parameters (possibly cast).
    pub fn encode<S: Scalar>(
        &self,
        g: &mut Graph<'_, S>,
        s: &Sentence,
        tree: Option<&DepTree>,
        ctx: Option<&ContextMatrix>,
    ) -> Result<NodeId> {
        let d = &self.config.dropout;
        let inputs = InputParams {
            cfg: &self.config.input,
            vocab: &self.vocab,
            word: self.layout.word,
            pos_head: self.layout.pos_head,
            pos_tail: self.layout.pos_tail,
            word_dropout: d.word,
            embedding_dropout: d.embedding,
        };
        let x = embed_inputs(g, &inputs, s, ctx)?;
        nets::encode(g, &self.config.encoder, &self.layout.enc, d, x, s, tree)
    }

    /// Relation logits for a representation; encoder dropout applies first.
    pub fn classify<S: Scalar>(&self, g: &mut Graph<'_, S>, rep: NodeId) -> Result<NodeId> {
        let rep = g.dropout(rep, self.config.dropout.encoder)?;
        let w = g.param(self.layout.cls_w);
        let b = g.param(self.layout.cls_b);
        Ok(g.linear(rep, w, b)?)
    }

    /// Logits for one sentence; builds the tree when the encoder needs it.
    pub fn logits<S: Scalar>(
        &self,
        g: &mut Graph<'_, S>,
        s: &Sentence,
        ctx: Option<&ContextMatrix>,
    ) -> Result<NodeId> {
        let tree = self.needs_tree().then(|| s.tree()).transpose()?;
        let rep = self.encode(g, s, tree.as_ref(), ctx)?;
        self.classify(g, rep)
    }

    pub fn needs_tree(&self) -> bool {
        self.kind() == EncoderKind::Gcn
    }

    /// Eval-mode representation.
    pub fn represent(&self, s: &Sentence, ctx: Option<&ContextMatrix>) -> Result<Vec<f32>> {
        let tree = self.needs_tree().then(|| s.tree()).transpose()?;
        let mut g = Graph::new(&self.params, Mode::Eval);
        let rep = self.encode(&mut g, s, tree.as_ref(), ctx)?;
        Ok(g.value(rep).data().to_vec())
    }

    /// Eval-mode logits.
    pub fn predict_logits(&self, s: &Sentence, ctx: Option<&ContextMatrix>) -> Result<Vec<f32>> {
        let mut g = Graph::new(&self.params, Mode::Eval);
        let l = self.logits(&mut g, s, ctx)?;
        Ok(g.value(l).data().to_vec())
    }

    /// Index of the highest logit (first on ties).
    pub fn predict(&self, s: &Sentence, ctx: Option<&ContextMatrix>) -> Result<usize> {
        Ok(argmax(&self.predict_logits(s, ctx)?))
    }

    /// First-layer attention weights per head for an attn model.
    pub fn attention_weights(&self, s: &Sentence) -> Result<Vec<Tensor<f32>>> {
        let EncParams::Attn(p) = &self.layout.enc else {
            return Err(Error::Config(format!("{} model has no attention", self.kind())));
        };
        let mut g = Graph::new(&self.params, Mode::Eval);
        let inputs = InputParams {
            cfg: &self.config.input,
            vocab: &self.vocab,
            word: self.layout.word,
            pos_head: self.layout.pos_head,
            pos_tail: self.layout.pos_tail,
            word_dropout: 0.0,
            embedding_dropout: 0.0,
        };
        let x = embed_inputs(&mut g, &inputs, s, None)?;
        let EncoderConfig::Attn { heads, .. } = self.config.encoder else {
            unreachable!("layout matches config")
        };
        let weights = nets::first_layer_attention(&mut g, p, heads, x)?;
        Ok(weights.into_iter().map(|w| g.value(w).clone()).collect())
    }

    /// Parameter id by name, for tests and tools that edit weights.
    pub fn param_id(&self, name: &str) -> Option<ParamId> {
        self.params.id(name)
    }
}

pub fn argmax(xs: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests;
