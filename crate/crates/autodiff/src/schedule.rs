/// Learning-rate policy, evaluated from the validation-F1 history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant,
    /// Multiply by `factor` once the best F1 has not improved by more than
    /// `min_delta` for `patience` consecutive epochs. The counter restarts
    /// after every decay.
    Plateau {
        factor: f64,
        patience: usize,
        min_delta: f64,
    },
    /// Multiply by `factor` at the start of every epoch `>= start_epoch`
    /// (epochs are 1-based).
    EpochDecay { factor: f64, start_epoch: usize },
}

impl Schedule {
    /// Learning rate for the epoch following `history`, where `history`
    /// holds one validation F1 per completed epoch.
    pub fn next_lr(&self, initial_lr: f64, history: &[f64]) -> f64 {
        match *self {
            Schedule::Constant => initial_lr,
            Schedule::Plateau {
                factor,
                patience,
                min_delta,
            } => {
                let mut lr = initial_lr;
                let mut best = f64::NEG_INFINITY;
                let mut stale = 0;
                for &f1 in history {
                    if f1 > best + min_delta {
                        best = f1;
                        stale = 0;
                    } else {
                        stale += 1;
                        if stale >= patience {
                            lr *= factor.min(1.0);
                            stale = 0;
                        }
                    }
                }
                lr
            }
            Schedule::EpochDecay {
                factor,
                start_epoch,
            } => {
                let epoch = history.len() + 1;
                let decays = (epoch + 1).saturating_sub(start_epoch.max(1));
                initial_lr * factor.min(1.0).powi(decays as i32)
            }
        }
    }
}
