use crate::error::{AutodiffError, Result};
use crate::graph::{Graph, Mode, NodeId};
use crate::params::ParamStore;

pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    /// `max |analytic - numeric| / max(1, |analytic|, |numeric|)`.
    pub max_rel_error: f64,
    /// Parameter name and flat index where the maximum was reached.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares analytic gradients with central differences for every element
/// of every trainable parameter.
///
/// `build` must construct the same scalar loss each time it is called; the
/// graph is rebuilt with `mode`, so a `Train` seed reproduces dropout masks.
pub fn gradcheck<F>(store: &ParamStore<f64>, mode: Mode, epsilon: f64, build: F) -> Result<GradcheckReport>
where
    F: Fn(&mut Graph<f64>) -> Result<NodeId>,
{
    let analytic = {
        let mut g = Graph::new(store, mode);
        let loss = build(&mut g)?;
        g.backward(loss)?
    };
    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new(s, mode);
        let loss = build(&mut g)?;
        Ok(g.value(loss).data()[0])
    };

    let mut work = store.clone();
    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let ids: Vec<_> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    for id in ids {
        let name = store.get(id).name.clone();
        for i in 0..store.value(id).len() {
            let original = store.value(id).data()[i];
            work.value_mut(id).data_mut()[i] = original + epsilon;
            let plus = eval(&work)?;
            work.value_mut(id).data_mut()[i] = original - epsilon;
            let minus = eval(&work)?;
            work.value_mut(id).data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let exact = analytic.get(id).map_or(0.0, |g| g.data()[i]);
            if !numeric.is_finite() || !exact.is_finite() {
                return Err(AutodiffError::NonFinite(format!("{name}[{i}]")));
            }
            let rel = (exact - numeric).abs() / 1f64.max(exact.abs()).max(numeric.abs());
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}
