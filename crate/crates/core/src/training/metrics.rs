use crate::error::{Error, Result};

/// Precision, recall and F1.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(tp: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

fn check_lengths(preds: usize, golds: usize) -> Result<()> {
    if preds != golds {
        return Err(Error::LengthMismatch { preds, golds });
    }
    Ok(())
}

/// Micro-averaged scores over the non-negative labels. Without a negative
/// label every prediction counts.
pub fn micro_f1<P: AsRef<str>, G: AsRef<str>>(preds: &[P], golds: &[G], negative: Option<&str>) -> Result<Prf> {
    check_lengths(preds.len(), golds.len())?;
    let positive = |l: &str| Some(l) != negative;
    let (mut tp, mut predicted, mut gold) = (0, 0, 0);
    for (p, g) in preds.iter().zip(golds) {
        let (p, g) = (p.as_ref(), g.as_ref());
        if positive(p) {
            predicted += 1;
            if p == g {
                tp += 1;
            }
        }
        if positive(g) {
            gold += 1;
        }
    }
    Ok(Prf::from_counts(tp, predicted, gold))
}

pub const SEMEVAL_TYPES: [&str; 9] = [
    "Cause-Effect",
    "Component-Whole",
    "Content-Container",
    "Entity-Destination",
    "Entity-Origin",
    "Instrument-Agency",
    "Member-Collection",
    "Message-Topic",
    "Product-Producer",
];

pub const SEMEVAL_OTHER: &str = "Other";

/// Type index of a directed SemEval label, `None` for `Other`.
fn semeval_type(label: &str) -> Result<Option<usize>> {
    if label == SEMEVAL_OTHER {
        return Ok(None);
    }
    let base = label
        .strip_suffix("(e1,e2)")
        .or_else(|| label.strip_suffix("(e2,e1)"))
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    SEMEVAL_TYPES
        .iter()
        .position(|t| *t == base)
        .map(Some)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Per-type scores pooling both directions; a true positive needs the exact
/// directed label. Averages over the types that occur in `golds` or
/// `preds`.
pub fn macro_prf_directional<P: AsRef<str>, G: AsRef<str>>(preds: &[P], golds: &[G]) -> Result<Prf> {
    check_lengths(preds.len(), golds.len())?;
    let mut tp = [0usize; 9];
    let mut predicted = [0usize; 9];
    let mut gold = [0usize; 9];
    for (p, g) in preds.iter().zip(golds) {
        let (p, g) = (p.as_ref(), g.as_ref());
        let (pt, gt) = (semeval_type(p)?, semeval_type(g)?);
        if let Some(t) = pt {
            predicted[t] += 1;
            if p == g {
                tp[t] += 1;
            }
        }
        if let Some(t) = gt {
            gold[t] += 1;
        }
    }
    let present: Vec<usize> = (0..9).filter(|&t| predicted[t] + gold[t] > 0).collect();
    if present.is_empty() {
        return Ok(Prf::default());
    }
    let n = present.len() as f64;
    let mut out = Prf::default();
    for t in present {
        let s = Prf::from_counts(tp[t], predicted[t], gold[t]);
        out.precision += s.precision / n;
        out.recall += s.recall / n;
        out.f1 += s.f1 / n;
    }
    Ok(out)
}

pub fn macro_f1_directional<P: AsRef<str>, G: AsRef<str>>(preds: &[P], golds: &[G]) -> Result<f64> {
    Ok(macro_prf_directional(preds, golds)?.f1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn micro_fixture() {
        let golds = ["A", "A", "neg", "B"];
        let preds = ["A", "neg", "neg", "A"];
        let s = micro_f1(&preds, &golds, Some("neg")).unwrap();
        assert_eq!((s.precision, s.recall), (0.5, 1.0 / 3.0));
        assert!((s.f1 - 0.4).abs() < 1e-15);
    }

    #[test]
    fn micro_all_correct_and_all_negative() {
        let g = ["A", "neg", "B"];
        let s = micro_f1(&g, &g, Some("neg")).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = micro_f1(&["neg"; 3], &g, Some("neg")).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        assert!(micro_f1(&["A"], &g, None).is_err());
    }

    #[test]
    fn directional_wrong_direction_scores_zero() {
        let golds = ["Cause-Effect(e1,e2)", "Member-Collection(e2,e1)"];
        let preds = ["Cause-Effect(e2,e1)", "Member-Collection(e1,e2)"];
        assert_eq!(macro_f1_directional(&preds, &golds).unwrap(), 0.0);
        assert_eq!(macro_f1_directional(&golds, &golds).unwrap(), 1.0);
    }

    #[test]
    fn unknown_semeval_label() {
        assert!(macro_f1_directional(&["Friend-Of(e1,e2)"], &["Other"]).is_err());
    }

    proptest! {
        #[test]
        fn micro_is_order_invariant(pairs in proptest::collection::vec((0u8..4, 0u8..4), 1..40), rot in 0usize..40) {
            let name = |x: u8| if x == 0 { "neg".to_string() } else { format!("L{x}") };
            let preds: Vec<String> = pairs.iter().map(|p| name(p.0)).collect();
            let golds: Vec<String> = pairs.iter().map(|p| name(p.1)).collect();
            let k = rot % pairs.len();
            let mut p2 = preds.clone();
            let mut g2 = golds.clone();
            p2.rotate_left(k);
            g2.rotate_left(k);
            prop_assert_eq!(
                micro_f1(&preds, &golds, Some("neg")).unwrap(),
                micro_f1(&p2, &g2, Some("neg")).unwrap()
            );
        }

        #[test]
        fn macro_symmetric_under_direction_swap(pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..40)) {
            let labels = ["Other", "Cause-Effect(e1,e2)", "Cause-Effect(e2,e1)", "Message-Topic(e1,e2)", "Message-Topic(e2,e1)"];
            let swapped = ["Other", "Cause-Effect(e2,e1)", "Cause-Effect(e1,e2)", "Message-Topic(e1,e2)", "Message-Topic(e2,e1)"];
            let p: Vec<&str> = pairs.iter().map(|x| labels[x.0]).collect();
            let g: Vec<&str> = pairs.iter().map(|x| labels[x.1]).collect();
            let ps: Vec<&str> = pairs.iter().map(|x| swapped[x.0]).collect();
            let gs: Vec<&str> = pairs.iter().map(|x| swapped[x.1]).collect();
            prop_assert_eq!(macro_f1_directional(&p, &g).unwrap(), macro_f1_directional(&ps, &gs).unwrap());
        }
    }
}
