use relprobe_core::training::{macro_f1_directional, macro_prf_directional, micro_f1};

const CE12: &str = "Cause-Effect(e1,e2)";
const CE21: &str = "Cause-Effect(e2,e1)";
const MT12: &str = "Message-Topic(e1,e2)";
const MT21: &str = "Message-Topic(e2,e1)";
const OTHER: &str = "Other";

/// Twelve (gold, pred) pairs.
///
/// Cause-Effect: 4 exact hits, 2 right type but wrong direction.
///   TP 4, predicted 6, gold 6 -> P = R = F1 = 2/3.
/// Message-Topic: 1 hit, 2 missed as Other, 2 Other predicted as MT.
///   TP 1, predicted 3, gold 3 -> P = R = F1 = 1/3.
/// One Other/Other pair counts for nothing.
/// Macro over the two types present: (2/3 + 1/3) / 2 = 0.5.
fn fixture() -> (Vec<&'static str>, Vec<&'static str>) {
    let pairs = [
        (CE12, CE12),
        (CE12, CE12),
        (CE21, CE21),
        (CE21, CE21),
        (CE21, CE12),
        (CE12, CE21),
        (MT12, MT12),
        (MT21, OTHER),
        (MT12, OTHER),
        (OTHER, MT21),
        (OTHER, MT12),
        (OTHER, OTHER),
    ];
    pairs.iter().copied().unzip()
}

#[test]
fn twelve_example_macro_fixture() {
    let (golds, preds) = fixture();
    assert_eq!(golds.len(), 12);
    let f1 = macro_f1_directional(&preds, &golds).unwrap();
    assert!((f1 - 0.5).abs() < 1e-12, "{f1}");
    let prf = macro_prf_directional(&preds, &golds).unwrap();
    assert!((prf.precision - 0.5).abs() < 1e-12);
    assert!((prf.recall - 0.5).abs() < 1e-12);
}

#[test]
fn wrong_direction_everywhere_is_zero() {
    let golds = [CE12, CE21, MT12, MT21];
    let preds = [CE21, CE12, MT21, MT12];
    assert_eq!(macro_f1_directional(&preds, &golds).unwrap(), 0.0);
}

#[test]
fn micro_hand_counted() {
    let s = micro_f1(&["A", "neg", "neg", "A"], &["A", "A", "neg", "B"], Some("neg")).unwrap();
    assert_eq!(s.precision, 0.5);
    assert_eq!(s.recall, 1.0 / 3.0);
    assert!((s.f1 - 0.4).abs() < 1e-15);
}
