use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::probe::{select, train_probe_at, ProbeOptions, ProbeResult};
use super::{BaselineKind, RepMatrix};
use crate::error::{Error, Result};
use crate::probegen::{ProbingDataset, TaskId};

/// A named set of representations to probe.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteSource {
    pub name: String,
    pub reps: RepMatrix,
    pub standardize: bool,
}

impl SuiteSource {
    pub fn new(name: impl Into<String>, reps: RepMatrix) -> Self {
        Self {
            name: name.into(),
            reps,
            standardize: false,
        }
    }

    /// Baseline row; the single-number baselines are standardized.
    pub fn baseline(kind: BaselineKind, reps: RepMatrix) -> Self {
        Self {
            name: kind.name().into(),
            reps,
            standardize: kind.is_scalar(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteRow {
    pub source: String,
    /// Aligned with [`SuiteReport::tasks`].
    pub results: Vec<ProbeResult>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub tasks: Vec<TaskId>,
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    /// One row per source, test accuracy per task.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source");
        for t in &self.tasks {
            out.push(',');
            out.push_str(t.name());
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.source);
            for r in &row.results {
                write!(out, ",{:.4}", r.test_accuracy).expect("writing to a string");
            }
            out.push('\n');
        }
        out
    }

    /// One line per (source, task) with the selected l2 and both accuracies.
    pub fn to_detail_csv(&self) -> String {
        let mut out = String::from("source,task,chosen_l2,val_accuracy,test_accuracy\n");
        for row in &self.rows {
            for r in &row.results {
                writeln!(
                    out,
                    "{},{},{},{:.4},{:.4}",
                    row.source,
                    r.task.name(),
                    r.chosen_l2,
                    r.val_accuracy,
                    r.test_accuracy
                )
                .expect("writing to a string");
            }
        }
        out
    }

    pub fn to_table(&self) -> String {
        render_table(&self.to_csv())
    }

    pub fn get(&self, source: &str, task: TaskId) -> Option<&ProbeResult> {
        let col = self.tasks.iter().position(|&t| t == task)?;
        self.rows.iter().find(|r| r.source == source).map(|r| &r.results[col])
    }
}

/// Aligned plain-text rendering of a comma-separated table; the first
/// column is left-aligned, the rest right-aligned.
pub fn render_table(csv: &str) -> String {
    let rows: Vec<Vec<&str>> = csv.lines().filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = (0..cols)
            .map(|c| {
                let cell = row.get(c).copied().unwrap_or("");
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// Probes every source on every task, searching `grid` for each pair.
/// Work is spread over `jobs` threads; the result does not depend on
/// `jobs`. `opts.standardize` applies on top of each source's own flag.
pub fn run_suite(
    sources: &[SuiteSource],
    tasks: &[ProbingDataset],
    grid: &[f64],
    opts: &ProbeOptions,
    jobs: usize,
) -> Result<SuiteReport> {
    if grid.is_empty() {
        return Err(Error::Config("l2 grid is empty".into()));
    }
    let units: Vec<(usize, usize, f64)> = (0..sources.len())
        .flat_map(|s| (0..tasks.len()).flat_map(move |t| grid.iter().map(move |&l2| (s, t, l2))))
        .collect();
    let slots: Mutex<Vec<Option<Result<ProbeResult>>>> = Mutex::new((0..units.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, units.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(s, t, l2)) = units.get(i) else { break };
                let src = &sources[s];
                let o = ProbeOptions {
                    standardize: opts.standardize || src.standardize,
                    ..opts.clone()
                };
                let r = train_probe_at(&src.reps, &tasks[t], l2, &o);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    let mut done = slots.into_inner().expect("no worker panicked").into_iter();
    let mut rows = Vec::with_capacity(sources.len());
    for src in sources {
        let mut results = Vec::with_capacity(tasks.len());
        for _ in tasks {
            let points = done
                .by_ref()
                .take(grid.len())
                .map(|r| r.expect("every unit ran"))
                .collect::<Result<Vec<_>>>()?;
            results.push(select(points).expect("grid is non-empty"));
        }
        rows.push(SuiteRow {
            source: src.name.clone(),
            results,
        });
    }
    Ok(SuiteReport {
        tasks: tasks.iter().map(|t| t.task).collect(),
        rows,
    })
}
