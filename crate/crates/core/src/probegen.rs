//! Probing-task datasets derived from corpus annotations.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence, Split};
use crate::deptree::{sdp, span_root, tree_depth, DepTree};
use crate::error::{Error, Result};

/// Tree depths above this are clamped before binning.
pub const MAX_TREE_DEPTH: usize = 15;

pub const GR_CLASSES: [&str; 5] = ["dobj", "iobj", "nsubj", "nsubjpass", "other"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    SentLen,
    ArgDist,
    EntExist,
    TreeDepth,
    SDPTreeDepth,
    ArgOrd,
    PosHeadL,
    PosHeadR,
    PosTailL,
    PosTailR,
    TypeHead,
    TypeTail,
    GRHead,
    GRTail,
}

impl TaskId {
    pub const ALL: [TaskId; 14] = [
        TaskId::SentLen,
        TaskId::ArgDist,
        TaskId::EntExist,
        TaskId::TreeDepth,
        TaskId::SDPTreeDepth,
        TaskId::ArgOrd,
        TaskId::PosHeadL,
        TaskId::PosHeadR,
        TaskId::PosTailL,
        TaskId::PosTailR,
        TaskId::TypeHead,
        TaskId::TypeTail,
        TaskId::GRHead,
        TaskId::GRTail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::SentLen => "SentLen",
            TaskId::ArgDist => "ArgDist",
            TaskId::EntExist => "EntExist",
            TaskId::TreeDepth => "TreeDepth",
            TaskId::SDPTreeDepth => "SDPTreeDepth",
            TaskId::ArgOrd => "ArgOrd",
            TaskId::PosHeadL => "PosHeadL",
            TaskId::PosHeadR => "PosHeadR",
            TaskId::PosTailL => "PosTailL",
            TaskId::PosTailR => "PosTailR",
            TaskId::TypeHead => "TypeHead",
            TaskId::TypeTail => "TypeTail",
            TaskId::GRHead => "GRHead",
            TaskId::GRTail => "GRTail",
        }
    }

    pub fn is_binned(self) -> bool {
        matches!(
            self,
            TaskId::SentLen | TaskId::ArgDist | TaskId::TreeDepth | TaskId::SDPTreeDepth
        )
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown probing task `{s}`")))
    }
}

/// Integer bins given by inclusive upper bounds. Values above the last
/// bound fall into a final unbounded bin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinSpec {
    pub boundaries: Vec<usize>,
}

impl BinSpec {
    pub fn n_bins(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn assign(&self, value: usize) -> usize {
        self.boundaries.partition_point(|&b| b < value)
    }

    pub fn label(bin: usize) -> String {
        format!("bin{bin}")
    }
}

/// Fits up to `n` bins holding roughly equal shares of `values`.
///
/// The k-th boundary is the observed value whose cumulative count is
/// closest to `k·N/n` (smaller value on ties). Repeated boundaries merge,
/// so heavily tied data yields fewer bins.
pub fn quantile_bins(values: &[usize], n: usize) -> Result<BinSpec> {
    if n < 2 {
        return Err(Error::Config(format!("bin count must be at least 2, got {n}")));
    }
    if values.is_empty() {
        return Err(Error::Config("cannot fit bins to an empty value list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let total = sorted.len() as f64;
    // (value, count of values <= value)
    let mut cumulative: Vec<(usize, usize)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        match cumulative.last_mut() {
            Some(last) if last.0 == v => last.1 = i + 1,
            _ => cumulative.push((v, i + 1)),
        }
    }
    let max = *sorted.last().expect("non-empty");
    let mut boundaries: Vec<usize> = (1..n)
        .map(|k| {
            let target = k as f64 * total / n as f64;
            cumulative
                .iter()
                .min_by(|a, b| {
                    let da = (a.1 as f64 - target).abs();
                    let db = (b.1 as f64 - target).abs();
                    da.total_cmp(&db).then(a.0.cmp(&b.0))
                })
                .expect("non-empty")
                .0
        })
        .filter(|&b| b < max)
        .collect();
    boundaries.sort_unstable();
    boundaries.dedup();
    Ok(BinSpec { boundaries })
}

/// Number of bins per binned task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskProfile {
    Tacred,
    Semeval,
    Custom {
        sent_len: usize,
        arg_dist: usize,
        tree_depth: usize,
        sdp_tree_depth: usize,
    },
}

impl TaskProfile {
    pub fn name(&self) -> &'static str {
        match self {
            TaskProfile::Tacred => "tacred",
            TaskProfile::Semeval => "semeval",
            TaskProfile::Custom { .. } => "custom",
        }
    }

    pub fn bins(&self, task: TaskId) -> Option<usize> {
        let (sl, ad, td, sd) = match *self {
            TaskProfile::Tacred => (10, 10, 10, 6),
            TaskProfile::Semeval => (7, 5, 7, 4),
            TaskProfile::Custom {
                sent_len,
                arg_dist,
                tree_depth,
                sdp_tree_depth,
            } => (sent_len, arg_dist, tree_depth, sdp_tree_depth),
        };
        match task {
            TaskId::SentLen => Some(sl),
            TaskId::ArgDist => Some(ad),
            TaskId::TreeDepth => Some(td),
            TaskId::SDPTreeDepth => Some(sd),
            _ => None,
        }
    }

    pub fn excludes(&self, task: TaskId) -> bool {
        matches!(self, TaskProfile::Semeval) && matches!(task, TaskId::ArgOrd | TaskId::EntExist)
    }

    pub fn tasks(&self) -> Vec<TaskId> {
        TaskId::ALL.into_iter().filter(|t| !self.excludes(*t)).collect()
    }
}

impl std::str::FromStr for TaskProfile {
    type Err = Error;

    /// `tacred`, `semeval`, or `custom:SL,AD,TD,SD`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tacred" => Ok(TaskProfile::Tacred),
            "semeval" => Ok(TaskProfile::Semeval),
            _ => {
                let bad = || Error::Config(format!("unknown task profile `{s}`"));
                let rest = s.strip_prefix("custom:").ok_or_else(bad)?;
                let n: Vec<usize> = rest
                    .split(',')
                    .map(|x| x.trim().parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                let [sent_len, arg_dist, tree_depth, sdp_tree_depth] = n[..] else {
                    return Err(bad());
                };
                Ok(TaskProfile::Custom {
                    sent_len,
                    arg_dist,
                    tree_depth,
                    sdp_tree_depth,
                })
            }
        }
    }
}

/// Raw label before binning or inventory mapping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawLabel {
    Count(usize),
    Tag(String),
}

pub fn extract(task: TaskId, s: &Sentence, tree: &DepTree) -> RawLabel {
    let (h, t) = (s.head, s.tail);
    let (first, second) = if h.start <= t.start { (h, t) } else { (t, h) };
    let between = (first.end + 1)..second.start;
    let pos_left = |start: usize| {
        start
            .checked_sub(1)
            .map_or_else(|| "<S>".to_string(), |i| s.pos[i].clone())
    };
    let pos_right = |end: usize| s.pos.get(end + 1).cloned().unwrap_or_else(|| "</S>".into());
    let tag = RawLabel::Tag;
    match task {
        TaskId::SentLen => RawLabel::Count(s.len()),
        TaskId::ArgDist => RawLabel::Count(between.len()),
        TaskId::EntExist => tag(between.clone().any(|i| s.ner[i] != "O").to_string()),
        TaskId::TreeDepth => RawLabel::Count(tree_depth(tree).min(MAX_TREE_DEPTH)),
        TaskId::SDPTreeDepth => RawLabel::Count(sdp(tree, h, t).depth),
        TaskId::ArgOrd => tag(if h.end < t.start { "head-first" } else { "tail-first" }.into()),
        TaskId::PosHeadL => tag(pos_left(h.start)),
        TaskId::PosHeadR => tag(pos_right(h.end)),
        TaskId::PosTailL => tag(pos_left(t.start)),
        TaskId::PosTailR => tag(pos_right(t.end)),
        TaskId::TypeHead => tag(s.ner[span_root(tree, h)].clone()),
        TaskId::TypeTail => tag(s.ner[span_root(tree, t)].clone()),
        TaskId::GRHead => tag(grammatical_role(&s.dep_label[span_root(tree, h)]).into()),
        TaskId::GRTail => tag(grammatical_role(&s.dep_label[span_root(tree, t)]).into()),
    }
}

/// Collapses a dependency label into the five grammatical-role classes.
pub fn grammatical_role(dep_label: &str) -> &'static str {
    match dep_label {
        "nsubj" => "nsubj",
        "nsubjpass" | "nsubj:pass" => "nsubjpass",
        "dobj" | "obj" => "dobj",
        "iobj" => "iobj",
        _ => "other",
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeItem {
    pub id: String,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbingDataset {
    pub task: TaskId,
    pub labels: Vec<String>,
    /// Indexed like [`Split::ALL`].
    pub splits: [Vec<ProbeItem>; 3],
    pub bin_spec: Option<BinSpec>,
}

impl ProbingDataset {
    pub fn split(&self, split: Split) -> &[ProbeItem] {
        &self.splits[split_index(split)]
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Training-split count per label, aligned with `labels`.
    pub fn train_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.labels.len()];
        for item in self.split(Split::Train) {
            if let Some(i) = self.label_index(&item.label) {
                counts[i] += 1;
            }
        }
        counts
    }
}

fn split_index(split: Split) -> usize {
    match split {
        Split::Train => 0,
        Split::Validation => 1,
        Split::Test => 2,
    }
}

/// Dependency trees for every sentence, in `Corpus::sentences` order.
pub fn build_trees(corpus: &Corpus) -> Result<Vec<DepTree>> {
    corpus.sentences().map(|s| s.tree()).collect()
}

pub fn build_task(task: TaskId, corpus: &Corpus, profile: &TaskProfile) -> Result<ProbingDataset> {
    let trees = build_trees(corpus)?;
    build_task_with_trees(task, corpus, &trees, profile)
}

pub fn build_task_with_trees(
    task: TaskId,
    corpus: &Corpus,
    trees: &[DepTree],
    profile: &TaskProfile,
) -> Result<ProbingDataset> {
    if profile.excludes(task) {
        return Err(Error::TaskExcluded {
            task: task.name().into(),
            profile: profile.name().into(),
        });
    }
    let mut trees = trees.iter();
    let raw: Vec<Vec<(String, RawLabel)>> = Split::ALL
        .iter()
        .map(|&split| {
            corpus
                .split(split)
                .iter()
                .map(|s| (s.id.clone(), extract(task, s, trees.next().expect("one tree per sentence"))))
                .collect()
        })
        .collect();

    let count = |l: &RawLabel| match l {
        RawLabel::Count(c) => *c,
        RawLabel::Tag(_) => unreachable!("binned tasks yield counts"),
    };
    let text = |l: RawLabel| match l {
        RawLabel::Tag(t) => t,
        RawLabel::Count(c) => c.to_string(),
    };

    let (labels, bin_spec, splits): (Vec<String>, Option<BinSpec>, Vec<Vec<ProbeItem>>) =
        if let Some(n) = profile.bins(task) {
            let train_values: Vec<usize> = raw[0].iter().map(|(_, l)| count(l)).collect();
            let spec = quantile_bins(&train_values, n)?;
            let labels = (0..spec.n_bins()).map(BinSpec::label).collect();
            let splits = raw
                .into_iter()
                .map(|items| {
                    items
                        .into_iter()
                        .map(|(id, l)| ProbeItem {
                            id,
                            label: BinSpec::label(spec.assign(count(&l))),
                        })
                        .collect()
                })
                .collect();
            (labels, Some(spec), splits)
        } else {
            let inventory: BTreeSet<String> = raw[0]
                .iter()
                .map(|(_, l)| text(l.clone()))
                .collect();
            let is_gr = matches!(task, TaskId::GRHead | TaskId::GRTail);
            let mut unseen = BTreeSet::new();
            let splits: Vec<Vec<ProbeItem>> = raw
                .into_iter()
                .map(|items| {
                    items
                        .into_iter()
                        .map(|(id, l)| {
                            let mut label = text(l);
                            if !inventory.contains(&label) {
                                if is_gr {
                                    label = "other".into();
                                }
                                unseen.insert(label.clone());
                            }
                            ProbeItem { id, label }
                        })
                        .collect()
                })
                .collect();
            let mut labels: Vec<String> = inventory.iter().cloned().collect();
            labels.extend(unseen.into_iter().filter(|l| !inventory.contains(l)));
            (labels, None, splits)
        };
    let splits: [Vec<ProbeItem>; 3] = splits.try_into().expect("three splits");
    Ok(ProbingDataset {
        task,
        labels,
        splits,
        bin_spec,
    })
}

/// Every task the profile admits, in [`TaskId::ALL`] order.
pub fn build_all(corpus: &Corpus, profile: &TaskProfile) -> Result<Vec<ProbingDataset>> {
    let trees = build_trees(corpus)?;
    profile
        .tasks()
        .into_iter()
        .map(|t| build_task_with_trees(t, corpus, &trees, profile))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SplitRecord {
    task: TaskId,
    labels: Vec<String>,
    split: String,
    items: Vec<ProbeItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bin_spec: Option<BinSpec>,
}

/// One JSON line per split.
pub fn write_dataset(path: &Path, ds: &ProbingDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for split in Split::ALL {
        let rec = SplitRecord {
            task: ds.task,
            labels: ds.labels.clone(),
            split: split.name().into(),
            items: ds.split(split).to_vec(),
            bin_spec: ds.bin_spec.clone(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<ProbingDataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut ds: Option<ProbingDataset> = None;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SplitRecord = serde_json::from_str(&line)?;
        let split: Split = rec.split.parse()?;
        let ds = ds.get_or_insert_with(|| ProbingDataset {
            task: rec.task,
            labels: rec.labels.clone(),
            splits: Default::default(),
            bin_spec: rec.bin_spec.clone(),
        });
        if ds.task != rec.task {
            return Err(Error::Format {
                what: "probing dataset",
                message: format!("mixed tasks {} and {}", ds.task, rec.task),
            });
        }
        ds.splits[split_index(split)] = rec.items;
    }
    ds.ok_or(Error::Format {
        what: "probing dataset",
        message: "no records".into(),
    })
}
