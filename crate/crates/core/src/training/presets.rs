use relprobe_autodiff::{L2Group, OptimizerKind, Schedule};

use super::{HyperProfile, Metric};
use crate::encoders::{Activation, Dropouts, EncoderConfig, EncoderKind, InputConfig};
use crate::error::{Error, Result};

/// Everything a named preset fixes: optimization, encoder shape, inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub profile: HyperProfile,
    pub encoder: EncoderConfig,
    pub input: InputConfig,
}

pub const PRESET_NAMES: [&str; 9] = [
    "tacred-cnn",
    "tacred-bilstm",
    "tacred-gcn",
    "tacred-attn",
    "semeval-cnn",
    "semeval-bilstm",
    "semeval-gcn",
    "semeval-attn",
    "desk-small",
];

const PLATEAU: Schedule = Schedule::Plateau {
    factor: 0.9,
    patience: 2,
    min_delta: 1e-4,
};

fn input(pos_dim: usize) -> InputConfig {
    InputConfig {
        word_dim: 300,
        pos_dim,
        max_offset: 50,
        use_contextual: false,
        contextual_dim: 0,
        masking: false,
        freeze_words: false,
    }
}

fn dropouts(word: f64, embedding: f64, encoder: f64, recurrent: f64, attention: f64) -> Dropouts {
    Dropouts {
        word,
        embedding,
        encoder,
        recurrent,
        attention,
    }
}

#[allow(clippy::too_many_arguments)]
fn profile(
    name: &str,
    optimizer: OptimizerKind,
    lr: f64,
    schedule: Schedule,
    epochs: usize,
    batch_size: usize,
    dropout: Dropouts,
    l2: Vec<L2Group>,
    metric: Metric,
) -> HyperProfile {
    HyperProfile {
        name: name.into(),
        optimizer,
        lr,
        schedule,
        epochs,
        batch_size,
        dropout,
        l2,
        metric,
        target_train_f1: None,
    }
}

fn attn(layers: usize, heads: usize, kv_dim: usize, ff_dim: usize) -> EncoderConfig {
    EncoderConfig::Attn {
        layers,
        heads,
        kv_dim,
        ff_dim,
    }
}

/// Named preset. `desk-small` needs `kind`; the dataset presets imply it
/// and reject a conflicting one.
pub fn preset(name: &str, kind: Option<EncoderKind>) -> Result<Preset> {
    let (base, implied) = match name.rsplit_once('-') {
        Some((base @ ("tacred" | "semeval" | "desk-small"), k)) => (base, Some(k.parse::<EncoderKind>()?)),
        _ => (name, None),
    };
    let kind = match (implied, kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!("preset {name} is for {a}, not {b}")));
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(Error::Config(format!("preset {name} needs an encoder kind"))),
    };
    use EncoderKind::*;
    use OptimizerKind::*;
    let decay15 = Schedule::EpochDecay {
        factor: 0.9,
        start_epoch: 15,
    };
    let full = format!("{base}-{kind}");
    let p = match (base, kind) {
        ("tacred", Cnn) => Preset {
            profile: profile(
                &full,
                Adagrad,
                0.1,
                decay15,
                50,
                50,
                dropouts(0.0, 0.0, 0.5, 0.0, 0.0),
                vec![L2Group::new("cnn.conv*.weight", 1e-3)],
                Metric::Micro,
            ),
            encoder: EncoderConfig::Cnn {
                filters: 500,
                widths: vec![2, 3, 4, 5],
                activation: Activation::Tanh,
            },
            input: input(30),
        },
        ("semeval", Cnn) => Preset {
            profile: profile(
                &full,
                Adadelta,
                1.0,
                Schedule::Constant,
                50,
                30,
                dropouts(0.04, 0.5, 0.5, 0.0, 0.0),
                vec![L2Group::new("cnn.conv*.weight", 1e-5)],
                Metric::MacroDirectional,
            ),
            encoder: EncoderConfig::Cnn {
                filters: 150,
                widths: vec![2, 3, 4, 5],
                activation: Activation::Tanh,
            },
            input: input(50),
        },
        ("tacred", Bilstm) => Preset {
            profile: profile(
                &full,
                Adagrad,
                0.01,
                decay15,
                30,
                50,
                dropouts(0.04, 0.0, 0.0, 0.5, 0.0),
                vec![],
                Metric::Micro,
            ),
            encoder: EncoderConfig::Bilstm { layers: 2, hidden: 500 },
            input: input(30),
        },
        ("semeval", Bilstm) => Preset {
            profile: profile(
                &full,
                Adagrad,
                0.01,
                decay15,
                30,
                30,
                dropouts(0.04, 0.5, 0.5, 0.5, 0.0),
                vec![],
                Metric::MacroDirectional,
            ),
            encoder: EncoderConfig::Bilstm { layers: 2, hidden: 300 },
            input: input(50),
        },
        ("tacred" | "semeval", Gcn) => {
            let tacred = base == "tacred";
            Preset {
                profile: profile(
                    &full,
                    Sgd,
                    0.3,
                    PLATEAU,
                    100,
                    if tacred { 50 } else { 30 },
                    dropouts(0.04, 0.5, 0.5, 0.0, 0.0),
                    vec![],
                    if tacred { Metric::Micro } else { Metric::MacroDirectional },
                ),
                encoder: EncoderConfig::Gcn {
                    layers: if tacred { 2 } else { 1 },
                    dim: 200,
                    ff_layers: 2,
                    prune_k: Some(1),
                },
                input: input(if tacred { 30 } else { 50 }),
            }
        }
        ("tacred" | "semeval", Attn) => {
            let tacred = base == "tacred";
            Preset {
                profile: profile(
                    &full,
                    Adam,
                    1e-4,
                    PLATEAU,
                    50,
                    if tacred { 50 } else { 30 },
                    dropouts(0.04, 0.5, 0.5, 0.0, 0.1),
                    vec![],
                    if tacred { Metric::Micro } else { Metric::MacroDirectional },
                ),
                encoder: attn(8, 8, 256, 512),
                input: input(if tacred { 30 } else { 50 }),
            }
        }
        ("desk-small", kind) => desk_small(kind),
        _ => {
            return Err(Error::Config(format!(
                "unknown preset `{name}` (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}

/// Small models that train in seconds on a few dozen sentences.
fn desk_small(kind: EncoderKind) -> Preset {
    let encoder = match kind {
        EncoderKind::Cnn => EncoderConfig::Cnn {
            filters: 32,
            widths: vec![2, 3],
            activation: Activation::Tanh,
        },
        EncoderKind::Bilstm => EncoderConfig::Bilstm { layers: 1, hidden: 16 },
        EncoderKind::Gcn => EncoderConfig::Gcn {
            layers: 2,
            dim: 24,
            ff_layers: 1,
            prune_k: Some(1),
        },
        EncoderKind::Attn => attn(2, 2, 16, 32),
        EncoderKind::Boe => EncoderConfig::Boe,
    };
    Preset {
        profile: profile(
            &format!("desk-small-{kind}"),
            OptimizerKind::Adam,
            0.01,
            Schedule::Constant,
            200,
            8,
            dropouts(0.0, 0.1, 0.1, 0.0, 0.0),
            vec![],
            Metric::Micro,
        ),
        encoder,
        input: InputConfig {
            word_dim: 16,
            pos_dim: 4,
            max_offset: 50,
            use_contextual: false,
            contextual_dim: 0,
            masking: false,
            freeze_words: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tacred_cnn_matches_published_settings() {
        let p = preset("tacred-cnn", None).unwrap();
        assert_eq!(p.profile.optimizer, OptimizerKind::Adagrad);
        assert_eq!(p.profile.lr, 0.1);
        assert_eq!(p.profile.epochs, 50);
        assert_eq!(p.profile.batch_size, 50);
        assert_eq!(
            p.profile.schedule,
            Schedule::EpochDecay {
                factor: 0.9,
                start_epoch: 15
            }
        );
        assert_eq!(p.profile.l2, vec![L2Group::new("cnn.conv*.weight", 1e-3)]);
        assert_eq!(p.profile.dropout.encoder, 0.5);
        assert_eq!(
            p.encoder,
            EncoderConfig::Cnn {
                filters: 500,
                widths: vec![2, 3, 4, 5],
                activation: Activation::Tanh
            }
        );
        assert_eq!((p.input.word_dim, p.input.pos_dim), (300, 30));
    }

    #[test]
    fn every_preset_resolves() {
        for name in PRESET_NAMES {
            let kinds: Vec<Option<EncoderKind>> = if name == "desk-small" {
                [EncoderKind::Cnn, EncoderKind::Bilstm, EncoderKind::Gcn, EncoderKind::Attn]
                    .map(Some)
                    .to_vec()
            } else {
                vec![None]
            };
            for k in kinds {
                let p = preset(name, k).unwrap();
                p.encoder.check().unwrap();
            }
        }
        assert!(preset("desk-small", None).is_err());
        assert!(preset("tacred-cnn", Some(EncoderKind::Gcn)).is_err());
        assert_eq!(preset("desk-small-gcn", None).unwrap().encoder.kind(), EncoderKind::Gcn);
    }

    #[test]
    fn semeval_gcn_has_one_layer() {
        let p = preset("semeval-gcn", None).unwrap();
        assert!(matches!(p.encoder, EncoderConfig::Gcn { layers: 1, dim: 200, .. }));
        assert_eq!(p.profile.batch_size, 30);
        assert_eq!(p.input.pos_dim, 50);
    }
}
