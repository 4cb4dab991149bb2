//! Relation-extraction training: hyperparameter profiles, the training
//! loop with best-validation selection, and evaluation metrics.

mod metrics;
mod presets;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relprobe_autodiff::{Graph, L2Group, Mode, OptimState, OptimizerKind, Schedule};
use serde::{Deserialize, Serialize};

use crate::corpus::{ContextualStore, Corpus, EmbeddingTable, Sentence};
use crate::encoders::{Dropouts, EncoderConfig, InputConfig, Model, ModelConfig, Vocab};
use crate::error::{Error, Result};

pub use metrics::{macro_f1_directional, macro_prf_directional, micro_f1, Prf, SEMEVAL_OTHER, SEMEVAL_TYPES};
pub use presets::{preset, Preset, PRESET_NAMES};

/// Validation metric driving model selection and plateau schedules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Micro-averaged over non-negative labels.
    Micro,
    /// SemEval-style macro average with directionality.
    MacroDirectional,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperProfile {
    pub name: String,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub schedule: Schedule,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: Dropouts,
    pub l2: Vec<L2Group>,
    pub metric: Metric,
    /// Stop once training-set micro-F1 reaches this value.
    pub target_train_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val: Prf,
    pub lr: f64,
    /// Present when the profile sets a training-F1 target.
    pub train_f1: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,val_p,val_r,val_f1,lr\n");
        for e in &self.epochs {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{}",
                e.epoch, e.loss, e.val.precision, e.val.recall, e.val.f1, e.lr
            )
            .expect("writing to a string");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv())?)
    }

    pub fn best_val_f1(&self) -> f64 {
        self.epochs.iter().map(|e| e.val.f1).fold(0.0, f64::max)
    }
}

/// Model configuration for training on `corpus`: labels from the training
/// inventory, vocabulary from (masked) training tokens.
pub fn model_config(corpus: &Corpus, input: &InputConfig, encoder: &EncoderConfig, dropout: &Dropouts) -> ModelConfig {
    ModelConfig {
        input: input.clone(),
        encoder: encoder.clone(),
        dropout: dropout.clone(),
        labels: corpus.label_inventory.clone(),
        vocab: Vocab::build(&corpus.train, input.masking).tokens().to_vec(),
    }
}

/// Predicted label names in eval mode.
pub fn predict_all(model: &Model, sentences: &[Sentence], ctx: Option<&ContextualStore>) -> Result<Vec<String>> {
    sentences
        .iter()
        .map(|s| {
            let i = model.predict(s, ctx.and_then(|c| c.get(&s.id)))?;
            Ok(model.config.labels[i].clone())
        })
        .collect()
}

pub fn evaluate(
    model: &Model,
    sentences: &[Sentence],
    ctx: Option<&ContextualStore>,
    metric: Metric,
    negative: Option<&str>,
) -> Result<Prf> {
    let preds = predict_all(model, sentences, ctx)?;
    let golds: Vec<&str> = sentences.iter().map(|s| s.relation.as_str()).collect();
    match metric {
        Metric::Micro => micro_f1(&preds, &golds, negative),
        Metric::MacroDirectional => macro_prf_directional(&preds, &golds),
    }
}

/// Per-batch dropout seed, distinct for every (run, epoch, batch).
fn batch_seed(seed: u64, epoch: usize, batch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (batch as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Trains `model` in place and returns its history. The parameters of the
/// epoch with the best validation score are restored at the end (the last
/// epoch when there is no validation split).
pub fn train_model(
    model: &mut Model,
    corpus: &Corpus,
    ctx: Option<&ContextualStore>,
    profile: &HyperProfile,
    seed: u64,
) -> Result<TrainHistory> {
    if profile.batch_size == 0 || profile.epochs == 0 {
        return Err(Error::Config("batch_size and epochs must be positive".into()));
    }
    let targets: Vec<usize> = corpus
        .train
        .iter()
        .map(|s| model.label_index(&s.relation).ok_or_else(|| Error::UnknownLabel(s.relation.clone())))
        .collect::<Result<_>>()?;
    let negative = corpus.negative_label.as_deref();
    let mut optim = OptimState::new(profile.optimizer, profile.lr, profile.l2.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..corpus.train.len()).collect();
    let mut history = TrainHistory::default();
    let mut val_scores = Vec::new();
    let mut best: Option<(f64, relprobe_autodiff::ParamStore<f32>)> = None;

    for epoch in 1..=profile.epochs {
        let lr = profile.schedule.next_lr(profile.lr, &val_scores);
        optim.set_lr(lr);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(profile.batch_size).enumerate() {
            let grads = {
                let mut g = Graph::new(&model.params, Mode::Train {
                    seed: batch_seed(seed, epoch, b),
                });
                let logits = batch
                    .iter()
                    .map(|&i| {
                        let s = &corpus.train[i];
                        model.logits(&mut g, s, ctx.and_then(|c| c.get(&s.id)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let all = g.concat_rows(&logits)?;
                let batch_targets: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
                let loss = g.softmax_cross_entropy(all, &batch_targets)?;
                let value = g.value(loss).data()[0] as f64;
                if !value.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                loss_sum += value * batch.len() as f64;
                g.backward(loss)?
            };
            model.params.zero_grad();
            model.params.accumulate(&grads);
            optim.step(&mut model.params);
        }
        let loss = loss_sum / corpus.train.len().max(1) as f64;
        let val = evaluate(model, &corpus.validation, ctx, profile.metric, negative)?;
        let train_f1 = match profile.target_train_f1 {
            Some(_) => Some(evaluate(model, &corpus.train, ctx, Metric::Micro, negative)?.f1),
            None => None,
        };
        val_scores.push(val.f1);
        let improved = match &best {
            None => true,
            Some((f1, _)) => corpus.validation.is_empty() || val.f1 > *f1,
        };
        if improved {
            best = Some((val.f1, model.params.clone()));
            history.best_epoch = epoch;
        }
        history.epochs.push(EpochRecord {
            epoch,
            loss,
            val,
            lr,
            train_f1,
        });
        if let (Some(target), Some(f1)) = (profile.target_train_f1, train_f1) {
            if f1 >= target {
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(history)
}

/// Builds a model for `corpus` from the given settings, trains it and
/// returns it with its history.
pub fn train_re(
    corpus: &Corpus,
    input: &InputConfig,
    encoder: &EncoderConfig,
    profile: &HyperProfile,
    embeddings: Option<&EmbeddingTable>,
    ctx: Option<&ContextualStore>,
    seed: u64,
) -> Result<(Model, TrainHistory)> {
    if input.use_contextual {
        let store = ctx.ok_or_else(|| Error::Config("contextual vectors requested but none supplied".into()))?;
        store.check_against(corpus)?;
    }
    let config = model_config(corpus, input, encoder, &profile.dropout);
    let mut model = Model::new(config, embeddings, seed)?;
    let history = train_model(&mut model, corpus, ctx, profile, seed)?;
    Ok((model, history))
}
