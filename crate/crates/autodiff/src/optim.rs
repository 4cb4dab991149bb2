use crate::params::ParamStore;
use crate::scalar::Scalar;

const EPS: f64 = 1e-8;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADADELTA_RHO: f64 = 0.95;
const ADADELTA_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adagrad,
    Adadelta,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adagrad" => Ok(Self::Adagrad),
            "adadelta" => Ok(Self::Adadelta),
            "adam" => Ok(Self::Adam),
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Adagrad => "adagrad",
            Self::Adadelta => "adadelta",
            Self::Adam => "adam",
        })
    }
}

/// L2 penalty `coefficient` applied to every parameter whose name matches
/// `pattern` (`*` matches any run of characters).
#[derive(Clone, Debug, PartialEq)]
pub struct L2Group {
    pub pattern: String,
    pub coefficient: f64,
}

impl L2Group {
    pub fn new(pattern: impl Into<String>, coefficient: f64) -> Self {
        Self {
            pattern: pattern.into(),
            coefficient,
        }
    }
}

/// Optimizer state: learning rate, L2 groups and per-parameter
/// accumulators (allocated lazily on the first step).
#[derive(Clone, Debug)]
pub struct OptimState {
    pub kind: OptimizerKind,
    lr: f64,
    pub l2_groups: Vec<L2Group>,
    steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimState {
    pub fn new(kind: OptimizerKind, lr: f64, l2_groups: Vec<L2Group>) -> Self {
        assert!(lr > 0.0, "learning rate must be positive");
        Self {
            kind,
            lr,
            l2_groups,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        assert!(lr > 0.0, "learning rate must be positive");
        self.lr = lr;
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// First accumulator of parameter `index` (adagrad: sum of squared
    /// gradients; adam: first moment; adadelta: running mean of g²).
    pub fn accumulator(&self, index: usize) -> Option<&[f64]> {
        self.first.get(index).map(Vec::as_slice)
    }

    fn l2_for(&self, name: &str) -> f64 {
        self.l2_groups
            .iter()
            .filter(|g| glob_match(&g.pattern, name))
            .map(|g| g.coefficient)
            .sum()
    }

    /// Applies one update from the gradients accumulated in `store`.
    /// Gradients are left untouched; callers zero them between batches.
    pub fn step<S: Scalar>(&mut self, store: &mut ParamStore<S>) {
        if self.first.len() != store.len() {
            self.first = store.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
            self.second = self.first.clone();
        }
        self.steps += 1;
        let lr = self.lr;
        let t = self.steps as i32;
        let kind = self.kind;
        let l2: Vec<f64> = store.iter().map(|(_, p)| self.l2_for(&p.name)).collect();
        for (id, p) in store.iter_mut() {
            if !p.trainable {
                continue;
            }
            let lambda = l2[id.0];
            let (first, second) = (&mut self.first[id.0], &mut self.second[id.0]);
            let grads = p.grad.data();
            let values = p.value.data_mut();
            for i in 0..values.len() {
                let w = values[i].to_f();
                let g = grads[i].to_f() + lambda * w;
                let delta = match kind {
                    OptimizerKind::Sgd => -lr * g,
                    OptimizerKind::Adagrad => {
                        first[i] += g * g;
                        -lr * g / (first[i] + EPS).sqrt()
                    }
                    OptimizerKind::Adadelta => {
                        first[i] = ADADELTA_RHO * first[i] + (1.0 - ADADELTA_RHO) * g * g;
                        let update = -((second[i] + ADADELTA_EPS).sqrt() / (first[i] + ADADELTA_EPS).sqrt()) * g;
                        second[i] =
                            ADADELTA_RHO * second[i] + (1.0 - ADADELTA_RHO) * update * update;
                        lr * update
                    }
                    OptimizerKind::Adam => {
                        first[i] = ADAM_BETA1 * first[i] + (1.0 - ADAM_BETA1) * g;
                        second[i] = ADAM_BETA2 * second[i] + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = first[i] / (1.0 - ADAM_BETA1.powi(t));
                        let v_hat = second[i] / (1.0 - ADAM_BETA2.powi(t));
                        -lr * m_hat / (v_hat.sqrt() + EPS)
                    }
                };
                values[i] = S::from_f(w + delta);
            }
        }
    }
}

/// Wildcard match where `*` stands for any (possibly empty) substring.
pub fn glob_match(pattern: &str, name: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == name;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !name.starts_with(first) || name.len() < first.len() + last.len() || !name.ends_with(last) {
        return false;
    }
    let mut rest = &name[first.len()..name.len() - last.len()];
    for middle in &parts[1..parts.len() - 1] {
        match rest.find(middle) {
            Some(pos) => rest = &rest[pos + middle.len()..],
            None => return false,
        }
    }
    true
}
