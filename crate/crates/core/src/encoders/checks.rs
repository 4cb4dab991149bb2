//! Finite-difference checks of every encoder at toy sizes.

use relprobe_autodiff::{gradcheck, AutodiffError, GradcheckReport, Mode, DEFAULT_EPSILON};

use super::{Activation, Dropouts, EncoderConfig, InputConfig, Model, ModelConfig, Vocab};
use crate::corpus::Sentence;
use crate::error::Result;
use crate::synth::{generate, presets, Padding};

/// Small encoder settings used by the checks and by tests.
pub fn toy_encoders() -> Vec<EncoderConfig> {
    vec![
        EncoderConfig::Cnn {
            filters: 3,
            widths: vec![1, 2, 3],
            activation: Activation::Tanh,
        },
        EncoderConfig::Bilstm { layers: 2, hidden: 2 },
        EncoderConfig::Gcn {
            layers: 2,
            dim: 3,
            ff_layers: 1,
            prune_k: Some(1),
        },
        EncoderConfig::Attn {
            layers: 2,
            heads: 2,
            kv_dim: 4,
            ff_dim: 5,
        },
    ]
}

/// A few short synthetic sentences with padding clauses.
pub fn toy_sentences(n: usize, seed: u64) -> Vec<Sentence> {
    let mut cfg = presets::basic(n, 0, 0, seed);
    cfg.padding = Some(Padding {
        max_clauses: 2,
        chain_prob: 0.5,
    });
    generate(&cfg).expect("preset is valid").train
}

pub fn toy_model(encoder: EncoderConfig, sentences: &[Sentence], dropout: Dropouts, seed: u64) -> Result<Model> {
    let mut labels: Vec<String> = sentences.iter().map(|s| s.relation.clone()).collect();
    labels.sort();
    labels.dedup();
    let config = ModelConfig {
        input: InputConfig {
            word_dim: 3,
            pos_dim: 2,
            max_offset: 4,
            use_contextual: false,
            contextual_dim: 0,
            masking: false,
            freeze_words: false,
        },
        encoder,
        dropout,
        labels,
        vocab: Vocab::build(sentences, false).tokens().to_vec(),
    };
    Model::new(config, None, seed)
}

/// Gradient check of the full classification loss for each encoder, in
/// training mode with every dropout active.
pub fn encoder_gradchecks() -> Result<Vec<(String, GradcheckReport)>> {
    let sentences = toy_sentences(2, 4);
    let dropout = Dropouts {
        word: 0.1,
        embedding: 0.1,
        encoder: 0.1,
        recurrent: 0.1,
        attention: 0.1,
    };
    let mut out = Vec::new();
    for enc in toy_encoders() {
        let name = enc.kind().to_string();
        let model = toy_model(enc, &sentences, dropout.clone(), 17)?;
        let targets: Vec<usize> = sentences
            .iter()
            .map(|s| model.label_index(&s.relation).expect("label from these sentences"))
            .collect();
        let store = model.cast_params::<f64>();
        let report = gradcheck(&store, Mode::Train { seed: 23 }, DEFAULT_EPSILON, |g| {
            let build = |g: &mut relprobe_autodiff::Graph<f64>| -> Result<_> {
                let logits = sentences
                    .iter()
                    .map(|s| model.logits(g, s, None))
                    .collect::<Result<Vec<_>>>()?;
                let all = g.concat_rows(&logits)?;
                Ok(g.softmax_cross_entropy(all, &targets)?)
            };
            build(g).map_err(|e| AutodiffError::Build(e.to_string()))
        })?;
        out.push((name, report));
    }
    Ok(out)
}
