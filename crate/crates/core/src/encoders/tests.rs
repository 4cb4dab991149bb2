use relprobe_autodiff::{Graph, Mode, Tensor};

use super::checks::{encoder_gradchecks, toy_encoders, toy_model, toy_sentences};
use super::*;
use crate::corpus::Span;

#[test]
fn boe_is_permutation_invariant() {
    let sents = toy_sentences(3, 1);
    let mut m = toy_model(EncoderConfig::Boe, &sents, Dropouts::default(), 2).unwrap();
    m.config.input.pos_dim = 0;
    let m = Model::new(m.config.clone(), None, 2).unwrap();
    let s = &sents[2];
    let mut p = s.clone();
    p.tokens.reverse();
    assert_eq!(m.represent(s, None).unwrap(), m.represent(&p, None).unwrap());
}

#[test]
fn width_one_identity_cnn_is_column_max() {
    let sents = toy_sentences(2, 3);
    let enc = EncoderConfig::Cnn {
        filters: 7,
        widths: vec![1],
        activation: Activation::Tanh,
    };
    let mut m = toy_model(enc, &sents, Dropouts::default(), 5).unwrap();
    let d = m.config.input.width();
    assert_eq!(d, 7);
    let w = m.param_id("cnn.conv1.weight").unwrap();
    let mut eye = vec![0.0f32; d * d];
    for i in 0..d {
        eye[i * d + i] = 1.0;
    }
    *m.params.value_mut(w) = Tensor::matrix(d, d, eye).unwrap();
    let s = &sents[1];
    let mut g = Graph::new(&m.params, Mode::Eval);
    let inputs = InputParams {
        cfg: &m.config.input,
        vocab: m.vocab(),
        word: m.param_id("embed.word").unwrap(),
        pos_head: m.param_id("embed.pos_head"),
        pos_tail: m.param_id("embed.pos_tail"),
        word_dropout: 0.0,
        embedding_dropout: 0.0,
    };
    let x = embed_inputs(&mut g, &inputs, s, None).unwrap();
    let x = g.value(x).clone();
    let expect: Vec<f32> = (0..d)
        .map(|c| (0..x.rows()).map(|r| x.get(r, c)).fold(f32::MIN, f32::max).tanh())
        .collect();
    assert_eq!(m.represent(s, None).unwrap(), expect);
}

#[test]
fn input_row_width() {
    let sents = toy_sentences(1, 0);
    let m = toy_model(EncoderConfig::Boe, &sents, Dropouts::default(), 0).unwrap();
    assert_eq!(m.config.input.width(), 3 + 2 + 2);
    assert_eq!(m.rep_dim(), 7);
}

#[test]
fn eval_mode_is_deterministic() {
    let sents = toy_sentences(2, 9);
    let drop = Dropouts {
        word: 0.5,
        embedding: 0.5,
        encoder: 0.5,
        recurrent: 0.5,
        attention: 0.5,
    };
    for enc in toy_encoders() {
        let m = toy_model(enc, &sents, drop.clone(), 1).unwrap();
        assert_eq!(m.represent(&sents[0], None).unwrap(), m.represent(&sents[0], None).unwrap());
    }
}

fn single_token_sentence() -> Sentence {
    Sentence {
        id: "one".into(),
        tokens: vec!["x".into()],
        pos: vec!["NN".into()],
        ner: vec!["O".into()],
        dep_head: vec![0],
        dep_label: vec!["ROOT".into()],
        head: Span::new(0, 0),
        tail: Span::new(0, 0),
        relation: "r".into(),
    }
}

#[test]
fn attention_on_single_token_is_one() {
    let s = single_token_sentence();
    let enc = toy_encoders().remove(3);
    let m = toy_model(enc, std::slice::from_ref(&s), Dropouts::default(), 3).unwrap();
    for w in m.attention_weights(&s).unwrap() {
        assert_eq!(w.data(), &[1.0]);
    }
}

#[test]
fn equal_keys_give_uniform_attention() {
    let sents = toy_sentences(2, 6);
    let enc = toy_encoders().remove(3);
    let mut m = toy_model(enc, &sents, Dropouts::default(), 3).unwrap();
    for name in ["attn.l0.k.weight", "attn.l0.k.bias"] {
        let id = m.param_id(name).unwrap();
        let v = m.params.value_mut(id);
        v.data_mut().fill(0.0);
    }
    let s = &sents[1];
    let t = s.len() as f32;
    for w in m.attention_weights(s).unwrap() {
        for &x in w.data() {
            assert!((x - 1.0 / t).abs() < 1e-6);
        }
    }
}

#[test]
fn zero_classifier_is_uniform() {
    let sents = toy_sentences(10, 2);
    let mut m = toy_model(toy_encoders().remove(0), &sents, Dropouts::default(), 3).unwrap();
    for name in ["cls.weight", "cls.bias"] {
        let id = m.param_id(name).unwrap();
        m.params.value_mut(id).data_mut().fill(0.0);
    }
    let logits = m.predict_logits(&sents[0], None).unwrap();
    let z: f32 = logits.iter().map(|l| l.exp()).sum();
    for l in &logits {
        assert!((l.exp() / z - 1.0 / logits.len() as f32).abs() < 1e-7);
    }
}

#[test]
fn hand_set_classifier_logits() {
    let mut sents = toy_sentences(2, 2);
    sents[0].relation = "a".into();
    sents[1].relation = "b".into();
    let mut m = toy_model(EncoderConfig::Boe, &sents, Dropouts::default(), 3).unwrap();
    let rep = m.represent(&sents[0], None).unwrap();
    let d = rep.len();
    let w: Vec<f32> = (0..d * 2).map(|i| (i as f32 - 3.0) * 0.25).collect();
    let id = m.param_id("cls.weight").unwrap();
    *m.params.value_mut(id) = Tensor::matrix(d, 2, w.clone()).unwrap();
    let id = m.param_id("cls.bias").unwrap();
    *m.params.value_mut(id) = Tensor::row_vector(vec![0.5, -1.0]);
    let logits = m.predict_logits(&sents[0], None).unwrap();
    for c in 0..2 {
        let mut expect = [0.5f32, -1.0][c];
        for (i, r) in rep.iter().enumerate() {
            expect += r * w[i * 2 + c];
        }
        assert!((logits[c] - expect).abs() < 1e-5);
    }
}

#[test]
fn masking_hides_mention_strings() {
    let sents = toy_sentences(4, 8);
    for enc in toy_encoders() {
        let mut m = toy_model(enc, &sents, Dropouts::default(), 4).unwrap();
        m.config.input.masking = true;
        m.config.vocab = Vocab::build(&sents, true).tokens().to_vec();
        let m = Model::new(m.config.clone(), None, 4).unwrap();
        for s in &sents {
            let mut r = s.clone();
            for i in s.head.indices().chain(s.tail.indices()) {
                r.tokens[i] = format!("zz{i}");
            }
            assert_eq!(m.represent(s, None).unwrap(), m.represent(&r, None).unwrap());
        }
    }
}

#[test]
fn gcn_ignores_pruned_tokens() {
    let sents = toy_sentences(6, 12);
    let enc = EncoderConfig::Gcn {
        layers: 2,
        dim: 3,
        ff_layers: 1,
        prune_k: Some(0),
    };
    let m = toy_model(enc, &sents, Dropouts::default(), 4).unwrap();
    let mut changed = 0;
    for s in &sents {
        let t = s.tree().unwrap();
        let kept = crate::deptree::prune(&t, &crate::deptree::sdp(&t, s.head, s.tail), Some(0));
        let mut r = s.clone();
        for i in 0..s.len() {
            if !kept.contains(&i) {
                r.tokens[i] = "<unk>".into();
                changed += 1;
            }
        }
        assert_eq!(m.represent(s, None).unwrap(), m.represent(&r, None).unwrap());
    }
    assert!(changed > 0);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let sents = toy_sentences(3, 5);
    let dir = std::env::temp_dir().join(format!("relprobe-enc-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for enc in toy_encoders() {
        let m = toy_model(enc, &sents, Dropouts::default(), 6).unwrap();
        let p = dir.join(format!("{}.ckpt", m.kind()));
        m.save(&p).unwrap();
        let back = Model::load(&p).unwrap();
        for s in &sents {
            assert_eq!(m.predict_logits(s, None).unwrap(), back.predict_logits(s, None).unwrap());
        }
    }
}

#[test]
fn encoders_pass_gradcheck() {
    for (name, r) in encoder_gradchecks().unwrap() {
        assert!(r.max_rel_error < 1e-4, "{name}: {r:?}");
    }
}
