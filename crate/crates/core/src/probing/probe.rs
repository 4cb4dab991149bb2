use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relprobe_autodiff::{Graph, Mode, OptimState, OptimizerKind, ParamStore, Tensor};

use super::RepMatrix;
use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::probegen::{ProbingDataset, TaskId};

pub const DEFAULT_GRID: [f64; 7] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeOptions {
    pub lr: f64,
    pub max_epochs: usize,
    /// Stop once the full-batch loss changes by less than this.
    pub tolerance: f64,
    /// Scale features to zero mean and unit variance on the training split.
    pub standardize: bool,
    /// Initial weights drawn uniformly from ±0.01; zeros when `None`.
    pub init_seed: Option<u64>,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            lr: 0.3,
            max_epochs: 500,
            tolerance: 1e-6,
            standardize: false,
            init_seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult {
    pub task: TaskId,
    pub chosen_l2: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    /// Final penalized training loss of the chosen model.
    pub train_loss: f64,
    pub epochs: usize,
}

/// Features and targets of one split.
struct Design {
    x: Vec<f64>,
    y: Vec<usize>,
}

fn design(reps: &RepMatrix, task: &ProbingDataset, split: Split) -> Result<Design> {
    let items = task.split(split);
    let mut x = Vec::with_capacity(items.len() * reps.dim());
    let mut y = Vec::with_capacity(items.len());
    for item in items {
        let row = reps.get(&item.id).ok_or_else(|| Error::MissingRep(item.id.clone()))?;
        x.extend(row.iter().map(|&v| v as f64));
        y.push(task.label_index(&item.label).ok_or_else(|| Error::UnknownLabel(item.label.clone()))?);
    }
    Ok(Design { x, y })
}

fn standardize(splits: &mut [Design; 3], dim: usize) {
    let n = splits[0].y.len().max(1) as f64;
    for c in 0..dim {
        let col = || splits[0].x.iter().skip(c).step_by(dim);
        let mean = col().sum::<f64>() / n;
        let var = col().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for d in splits.iter_mut() {
            for v in d.x.iter_mut().skip(c).step_by(dim) {
                *v = (*v - mean) / sd;
            }
        }
    }
}

struct Fitted {
    weight: Tensor<f64>,
    bias: Tensor<f64>,
    loss: f64,
    epochs: usize,
}

impl Fitted {
    fn accuracy(&self, d: &Design, dim: usize) -> f64 {
        if d.y.is_empty() {
            return 0.0;
        }
        let classes = self.bias.len();
        let correct = d
            .y
            .iter()
            .enumerate()
            .filter(|&(i, &gold)| {
                let row = &d.x[i * dim..(i + 1) * dim];
                let mut best = (0, f64::NEG_INFINITY);
                for k in 0..classes {
                    let z = self.bias.data()[k] + (0..dim).map(|j| row[j] * self.weight.get(j, k)).sum::<f64>();
                    if z > best.1 {
                        best = (k, z);
                    }
                }
                best.0 == gold
            })
            .count();
        correct as f64 / d.y.len() as f64
    }
}

/// Multinomial logistic regression: mean cross-entropy plus
/// `l2/2 * |W|^2`, full-batch Adam.
fn fit(train: &Design, dim: usize, classes: usize, l2: f64, opts: &ProbeOptions) -> Result<Fitted> {
    let n = train.y.len();
    if n == 0 {
        return Err(Error::Config("probe training split is empty".into()));
    }
    let mut init = vec![0.0; dim * classes];
    if let Some(seed) = opts.init_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        init.iter_mut().for_each(|v| *v = rng.gen_range(-0.01..0.01));
    }
    let mut store = ParamStore::<f64>::new();
    let w = store.add("probe.weight", Tensor::matrix(dim, classes, init)?)?;
    let b = store.add("probe.bias", Tensor::zeros(vec![1, classes]))?;
    let x = Tensor::matrix(n, dim, train.x.clone())?;
    let mut optim = OptimState::new(OptimizerKind::Adam, opts.lr, Vec::new());
    let mut prev = f64::INFINITY;
    let mut loss_value = f64::INFINITY;
    let mut epochs = 0;
    while epochs < opts.max_epochs {
        let grads = {
            let mut g = Graph::new(&store, Mode::Eval);
            let xs = g.input(x.clone());
            let (wn, bn) = (g.param(w), g.param(b));
            let logits = g.linear(xs, wn, bn)?;
            let mut loss = g.softmax_cross_entropy(logits, &train.y)?;
            if l2 > 0.0 {
                let sq = g.mul(wn, wn)?;
                let total = g.sum(sq);
                let penalty = g.scale(total, l2 / 2.0);
                loss = g.add(loss, penalty)?;
            }
            loss_value = g.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(Error::Diverged { epoch: epochs + 1 });
            }
            g.backward(loss)?
        };
        if (prev - loss_value).abs() < opts.tolerance {
            break;
        }
        prev = loss_value;
        store.zero_grad();
        store.accumulate(&grads);
        optim.step(&mut store);
        epochs += 1;
    }
    Ok(Fitted {
        weight: store.value(w).clone(),
        bias: store.value(b).clone(),
        loss: loss_value,
        epochs,
    })
}

struct Prepared {
    splits: [Design; 3],
    dim: usize,
    classes: usize,
}

fn prepare(reps: &RepMatrix, task: &ProbingDataset, opts: &ProbeOptions) -> Result<Prepared> {
    let mut splits = [
        design(reps, task, Split::Train)?,
        design(reps, task, Split::Validation)?,
        design(reps, task, Split::Test)?,
    ];
    if opts.standardize {
        standardize(&mut splits, reps.dim());
    }
    Ok(Prepared {
        splits,
        dim: reps.dim(),
        classes: task.labels.len(),
    })
}

/// Probe trained at a single l2 value.
pub fn train_probe_at(reps: &RepMatrix, task: &ProbingDataset, l2: f64, opts: &ProbeOptions) -> Result<ProbeResult> {
    let p = prepare(reps, task, opts)?;
    let f = fit(&p.splits[0], p.dim, p.classes, l2, opts)?;
    Ok(ProbeResult {
        task: task.task,
        chosen_l2: l2,
        val_accuracy: f.accuracy(&p.splits[1], p.dim),
        test_accuracy: f.accuracy(&p.splits[2], p.dim),
        train_loss: f.loss,
        epochs: f.epochs,
    })
}

/// Best of `points` by validation accuracy, smaller l2 on ties.
pub(super) fn select(points: impl IntoIterator<Item = ProbeResult>) -> Option<ProbeResult> {
    points.into_iter().fold(None, |best: Option<ProbeResult>, r| match best {
        Some(b) if b.val_accuracy > r.val_accuracy || (b.val_accuracy == r.val_accuracy && b.chosen_l2 <= r.chosen_l2) => {
            Some(b)
        }
        _ => Some(r),
    })
}

/// Grid search over `grid`, keeping the l2 with the best validation
/// accuracy.
pub fn train_probe(reps: &RepMatrix, task: &ProbingDataset, grid: &[f64], opts: &ProbeOptions) -> Result<ProbeResult> {
    if grid.is_empty() {
        return Err(Error::Config("l2 grid is empty".into()));
    }
    let p = prepare(reps, task, opts)?;
    let mut results = Vec::with_capacity(grid.len());
    for &l2 in grid {
        let f = fit(&p.splits[0], p.dim, p.classes, l2, opts)?;
        results.push(ProbeResult {
            task: task.task,
            chosen_l2: l2,
            val_accuracy: f.accuracy(&p.splits[1], p.dim),
            test_accuracy: f.accuracy(&p.splits[2], p.dim),
            train_loss: f.loss,
            epochs: f.epochs,
        });
    }
    Ok(select(results).expect("grid is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probegen::ProbeItem;

    /// Dataset over ids `s{i}` with the given labels split 60/20/20.
    pub(crate) fn toy(task: TaskId, labels: &[&str], y: &[usize]) -> ProbingDataset {
        let items: Vec<ProbeItem> = y
            .iter()
            .enumerate()
            .map(|(i, &k)| ProbeItem {
                id: format!("s{i}"),
                label: labels[k].to_string(),
            })
            .collect();
        let n = items.len();
        let (a, b) = (n * 3 / 5, n * 4 / 5);
        ProbingDataset {
            task,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            splits: [items[..a].to_vec(), items[a..b].to_vec(), items[b..].to_vec()],
            bin_spec: None,
        }
    }

    fn reps(rows: &[Vec<f32>]) -> RepMatrix {
        let dim = rows[0].len();
        RepMatrix::from_rows(
            rows.iter().enumerate().map(|(i, r)| (format!("s{i}"), r.clone())).collect(),
            dim,
            "toy",
        )
        .unwrap()
    }

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f32>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let k = i % 2;
            let sign = if k == 0 { -1.0 } else { 1.0 };
            rows.push(vec![sign * rng.gen_range(0.5f32..2.0), rng.gen_range(-1.0f32..1.0)]);
            y.push(k);
        }
        (rows, y)
    }

    #[test]
    fn separable_two_class() {
        let (rows, y) = separable(100, 1);
        let ds = toy(TaskId::ArgOrd, &["a", "b"], &y);
        let r = train_probe(&reps(&rows), &ds, &[0.0], &ProbeOptions::default()).unwrap();
        assert_eq!(r.test_accuracy, 1.0);
        assert_eq!(r.chosen_l2, 0.0);
    }

    #[test]
    fn scaling_rows_keeps_separable_predictions() {
        let (rows, y) = separable(100, 2);
        let ds = toy(TaskId::ArgOrd, &["a", "b"], &y);
        let scaled: Vec<Vec<f32>> = rows.iter().map(|r| r.iter().map(|v| v * 3.0).collect()).collect();
        let a = train_probe_at(&reps(&rows), &ds, 0.0, &ProbeOptions::default()).unwrap();
        let b = train_probe_at(&reps(&scaled), &ds, 0.0, &ProbeOptions::default()).unwrap();
        assert_eq!((a.val_accuracy, a.test_accuracy), (b.val_accuracy, b.test_accuracy));
    }

    #[test]
    fn random_labels_score_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1000;
        let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..4).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        // chance level is judged on all 1,000 items
        let mut ds = toy(TaskId::ArgOrd, &["a", "b"], &y);
        ds.splits[2] = ds.splits.concat();
        let r = train_probe(&reps(&rows), &ds, &DEFAULT_GRID, &ProbeOptions::default()).unwrap();
        assert!((r.test_accuracy - 0.5).abs() <= 0.05, "{}", r.test_accuracy);
    }

    #[test]
    fn convex_from_different_starts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f32>> = (0..120).map(|_| (0..3).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).collect();
        let y: Vec<usize> = rows.iter().map(|r| if r[0] + 0.3 * r[1] + rng.gen_range(-0.5f32..0.5) > 0.0 { 1 } else { 0 }).collect();
        let ds = toy(TaskId::ArgOrd, &["a", "b"], &y);
        let m = reps(&rows);
        let run = |seed| {
            let opts = ProbeOptions {
                init_seed: seed,
                max_epochs: 5000,
                tolerance: 1e-12,
                ..ProbeOptions::default()
            };
            train_probe_at(&m, &ds, 1e-2, &opts).unwrap().train_loss
        };
        let (a, b) = (run(None), run(Some(77)));
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn chosen_l2_maximizes_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f32>> = (0..150).map(|_| (0..6).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] + r[1] > 0.2) + usize::from(r[2] > 0.5)).collect();
        let ds = toy(TaskId::ArgDist, &["x", "y", "z"], &y);
        let m = reps(&rows);
        let opts = ProbeOptions::default();
        let best = train_probe(&m, &ds, &DEFAULT_GRID, &opts).unwrap();
        let all: Vec<ProbeResult> = DEFAULT_GRID.iter().map(|&l2| train_probe_at(&m, &ds, l2, &opts).unwrap()).collect();
        let top = all.iter().map(|r| r.val_accuracy).fold(0.0, f64::max);
        assert_eq!(best.val_accuracy, top);
        let first = all.iter().find(|r| r.val_accuracy == top).unwrap();
        assert_eq!(best.chosen_l2, first.chosen_l2);
        assert!(DEFAULT_GRID.contains(&best.chosen_l2));
    }

    #[test]
    fn missing_rep_names_id() {
        let ds = toy(TaskId::ArgOrd, &["a", "b"], &[0, 1, 0, 1, 0]);
        let m = RepMatrix::from_rows(vec![("s0".into(), vec![1.0])], 1, "x").unwrap();
        let err = train_probe(&m, &ds, &[0.0], &ProbeOptions::default()).unwrap_err();
        assert!(err.to_string().contains("s1"), "{err}");
        assert!(train_probe(&m, &ds, &[], &ProbeOptions::default()).is_err());
    }

    #[test]
    fn ties_prefer_smaller_l2() {
        let r = |l2, acc| ProbeResult {
            task: TaskId::ArgOrd,
            chosen_l2: l2,
            val_accuracy: acc,
            test_accuracy: 0.0,
            train_loss: 0.0,
            epochs: 0,
        };
        assert_eq!(select([r(1.0, 0.5), r(0.1, 0.5), r(10.0, 0.4)]).unwrap().chosen_l2, 0.1);
        assert_eq!(select([r(0.0, 0.5), r(1e-4, 0.6)]).unwrap().chosen_l2, 1e-4);
    }
}
