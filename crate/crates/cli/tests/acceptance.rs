//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Every measured value is checked against an oracle written here
//! rather than against the library's own helpers where that is possible.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relprobe_autodiff::checks::op_gradchecks;
use relprobe_core::corpus::{mask_entities, Corpus, EmbeddingTable, Sentence, Span, Split};
use relprobe_core::deptree::{prune, sdp, tree_depth, DepTree};
use relprobe_core::encoders::checks::encoder_gradchecks;
use relprobe_core::encoders::EncoderKind;
use relprobe_core::probegen::{build_task, TaskId, TaskProfile};
use relprobe_core::probing::{baseline_reps, extract_reps, train_probe, BaselineKind, ProbeOptions, RepMatrix, DEFAULT_GRID};
use relprobe_core::synth::{generate, generate_order_controlled, presets};
use relprobe_core::training::{macro_f1_directional, micro_f1, predict_all, preset, train_re};

const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const TREES: usize = 1000;
const BASELINE_MIN: f64 = 0.99;
const ARGORD_CENTER: f64 = 0.50;
const ARGORD_TOL: f64 = 0.05;
const MIN_PAIRS: usize = 500;
const FIT_F1: f64 = 0.99;
const FIT_EPOCHS: usize = 200;
const FIT_BUDGET: Duration = Duration::from_secs(300);
const TYPE_MIN: f64 = 0.90;
const METRIC_TOL: f64 = 1e-12;
const MIN_DISTINCT_LENGTHS: usize = 50;
const MAX_BIN_RATIO: f64 = 2.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn test_accuracy(reps: &RepMatrix, corpus: &Corpus, task: TaskId, standardize: bool) -> Result<f64, String> {
    let ds = build_task(task, corpus, &TaskProfile::Tacred).map_err(e)?;
    let opts = ProbeOptions {
        standardize,
        ..ProbeOptions::default()
    };
    Ok(train_probe(reps, &ds, &DEFAULT_GRID, &opts).map_err(e)?.test_accuracy)
}

fn all_sentences(c: &Corpus) -> Vec<Sentence> {
    c.sentences().cloned().collect()
}

fn random_table(c: &Corpus, dim: usize, seed: u64) -> EmbeddingTable {
    EmbeddingTable::random(c.sentences().flat_map(|s| s.tokens.iter().map(String::as_str)), dim, seed)
}

fn c1_gradcheck() -> Outcome {
    let t = Instant::now();
    let mut worst = (String::new(), 0.0f64);
    let mut n = 0;
    let ops = op_gradchecks().map_err(e)?;
    let encs = encoder_gradchecks().map_err(e)?;
    for (name, r) in ops.iter().map(|(n, r)| (n.to_string(), r)).chain(encs.iter().map(|(n, r)| (n.clone(), r))) {
        n += 1;
        if r.max_rel_error >= worst.1 {
            worst = (name, r.max_rel_error);
        }
    }
    let kinds: BTreeSet<&str> = encs.iter().map(|(n, _)| n.as_str()).collect();
    let elapsed = t.elapsed();
    check(
        worst.1 < GRAD_TOL && elapsed < GRAD_BUDGET && ["cnn", "bilstm", "gcn", "attn"].iter().all(|k| kinds.contains(k)),
        format!("{n} checks, worst {} {:.2e} (< {GRAD_TOL:e}), {:.1}s", worst.0, worst.1, elapsed.as_secs_f64()),
    )
}

fn random_heads(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut heads = vec![0; n];
    for k in 1..n {
        heads[order[k]] = order[rng.gen_range(0..k)] + 1;
    }
    heads
}

fn floyd_warshall(heads: &[usize]) -> Vec<Vec<usize>> {
    let n = heads.len();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        if heads[i] > 0 {
            d[i][heads[i] - 1] = 1;
            d[heads[i] - 1][i] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    d
}

/// Multi-source BFS over the undirected tree, stopping at distance `k`.
fn bfs_within(heads: &[usize], sources: &[usize], k: usize) -> Vec<usize> {
    let n = heads.len();
    let mut adj = vec![Vec::new(); n];
    for (i, &h) in heads.iter().enumerate() {
        if h > 0 {
            adj[i].push(h - 1);
            adj[h - 1].push(i);
        }
    }
    let mut dist = vec![usize::MAX; n];
    let mut q = VecDeque::new();
    for &s in sources {
        dist[s] = 0;
        q.push_back(s);
    }
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    (0..n).filter(|&i| dist[i] <= k).collect()
}

fn c2_trees() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(688);
    let mut bad = 0;
    for _ in 0..TREES {
        let n = rng.gen_range(5..=40);
        let heads = random_heads(n, &mut rng);
        let (head, tail) = loop {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b {
                break (Span::new(a, a), Span::new(b, b));
            }
        };
        let t = DepTree::build(&heads).map_err(e)?;
        let d = floyd_warshall(&heads);
        let r = sdp(&t, head, tail);
        let mut ok = r.path.len() == d[head.start][tail.start] + 1
            && r.path.first() == Some(&head.start)
            && r.path.last() == Some(&tail.start)
            && r.path.windows(2).all(|w| d[w[0]][w[1]] == 1)
            && r.depth <= tree_depth(&t);
        for k in 0..=2 {
            ok &= prune(&t, &r, Some(k)) == bfs_within(&heads, &r.path, k);
        }
        bad += usize::from(!ok);
    }
    check(bad == 0, format!("{TREES} trees, {bad} disagreements with Floyd-Warshall / BFS"))
}

fn c3_baselines() -> Outcome {
    let corpus = generate(&presets::varied(1600, 200, 200, 11)).map_err(e)?;
    let all = all_sentences(&corpus);
    let len = baseline_reps(BaselineKind::Length, &all, None).map_err(e)?;
    let dist = baseline_reps(BaselineKind::ArgDist, &all, None).map_err(e)?;
    // Oracle features: token count and the gap between the two spans.
    let feats_ok = all.iter().all(|s| {
        let gap = if s.head.end < s.tail.start {
            s.tail.start - s.head.end - 1
        } else {
            s.head.start.saturating_sub(s.tail.end + 1)
        };
        len.get(&s.id) == Some(&[s.tokens.len() as f32][..]) && dist.get(&s.id) == Some(&[gap as f32][..])
    });
    let a = test_accuracy(&len, &corpus, TaskId::SentLen, true)?;
    let b = test_accuracy(&dist, &corpus, TaskId::ArgDist, true)?;
    check(
        corpus.len() == 2000 && feats_ok && a >= BASELINE_MIN && b >= BASELINE_MIN,
        format!("Length on SentLen {a:.4}, ArgDist on ArgDist {b:.4} (>= {BASELINE_MIN}), features match oracle: {feats_ok}"),
    )
}

fn c4_boe_argord() -> Outcome {
    let corpus = generate_order_controlled(&presets::varied(400, 50, 50, 12), 12).map_err(e)?;
    let all = all_sentences(&corpus);
    // Pairs share a token multiset; count them independently of ids.
    let mut bags: Vec<Vec<String>> = all
        .iter()
        .map(|s| {
            let mut t = s.tokens.clone();
            t.sort();
            t
        })
        .collect();
    bags.sort();
    let pairs = bags.chunks(2).filter(|c| c.len() == 2 && c[0] == c[1]).count();
    let table = random_table(&corpus, 16, 12);
    let reps = baseline_reps(BaselineKind::Boe, &all, Some(&table)).map_err(e)?;
    let acc = test_accuracy(&reps, &corpus, TaskId::ArgOrd, false)?;
    check(
        pairs >= MIN_PAIRS && (acc - ARGORD_CENTER).abs() <= ARGORD_TOL,
        format!("{pairs} order-controlled pairs, BoE ArgOrd {acc:.4} (target {ARGORD_CENTER} +/- {ARGORD_TOL})"),
    )
}

fn c5_fit() -> Outcome {
    let corpus = generate(&presets::varied(64, 0, 0, 7)).map_err(e)?;
    let neg = corpus.negative_label.clone();
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in [EncoderKind::Cnn, EncoderKind::Bilstm, EncoderKind::Gcn, EncoderKind::Attn] {
        let mut p = preset("desk-small", Some(kind)).map_err(e)?;
        p.profile.target_train_f1 = Some(FIT_F1);
        let t = Instant::now();
        let (model, history) = train_re(&corpus, &p.input, &p.encoder, &p.profile, None, None, 1).map_err(e)?;
        let elapsed = t.elapsed();
        let preds = predict_all(&model, &corpus.train, None).map_err(e)?;
        let golds: Vec<&str> = corpus.train.iter().map(|s| s.relation.as_str()).collect();
        let f1 = micro_f1(&preds, &golds, neg.as_deref()).map_err(e)?.f1;
        let epochs = history.epochs.len();
        ok &= f1 >= FIT_F1 && epochs <= FIT_EPOCHS && elapsed < FIT_BUDGET;
        lines.push(format!("{kind} {f1:.3}@{epochs}ep {:.1}s", elapsed.as_secs_f64()));
    }
    check(ok, format!("train micro-F1 on 64: {}", lines.join(", ")))
}

fn c6_types() -> Outcome {
    let corpus = generate(&presets::typed(600, 150, 150, 13)).map_err(e)?;
    let all = all_sentences(&corpus);
    let p = preset("desk-small", Some(EncoderKind::Cnn)).map_err(e)?;
    let (model, _) = train_re(&corpus, &p.input, &p.encoder, &p.profile, None, None, 3).map_err(e)?;
    let cnn = extract_reps(&model, &all, None, "cnn").map_err(e)?;
    let boe = baseline_reps(BaselineKind::Boe, &all, Some(&random_table(&corpus, 50, 13))).map_err(e)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for task in [TaskId::TypeHead, TaskId::TypeTail] {
        let a = test_accuracy(&cnn, &corpus, task, false)?;
        let b = test_accuracy(&boe, &corpus, task, false)?;
        ok &= a >= TYPE_MIN && a > b;
        parts.push(format!("{task} cnn {a:.4} vs BoE {b:.4}"));
    }
    check(ok, format!("{} (cnn >= {TYPE_MIN})", parts.join(", ")))
}

fn c7_metrics() -> Outcome {
    let (ce12, ce21, mt12, mt21, other) =
        ("Cause-Effect(e1,e2)", "Cause-Effect(e2,e1)", "Message-Topic(e1,e2)", "Message-Topic(e2,e1)", "Other");
    // Cause-Effect: 4 of 6 predicted and gold correct -> F1 2/3.
    // Message-Topic: 1 of 3 -> F1 1/3. Macro over present types: 0.5.
    let pairs = [
        (ce12, ce12),
        (ce12, ce12),
        (ce21, ce21),
        (ce21, ce21),
        (ce21, ce12),
        (ce12, ce21),
        (mt12, mt12),
        (mt21, other),
        (mt12, other),
        (other, mt21),
        (other, mt12),
        (other, other),
    ];
    let (golds, preds): (Vec<&str>, Vec<&str>) = pairs.iter().copied().unzip();
    let macro_f1 = macro_f1_directional(&preds, &golds).map_err(e)?;
    let flipped = macro_f1_directional(&[ce21, ce12, mt21, mt12], &[ce12, ce21, mt12, mt21]).map_err(e)?;
    let micro = micro_f1(&["A", "neg", "neg", "A"], &["A", "A", "neg", "B"], Some("neg")).map_err(e)?;
    let ok = (macro_f1 - 0.5).abs() < METRIC_TOL
        && flipped == 0.0
        && (micro.precision - 0.5).abs() < METRIC_TOL
        && (micro.recall - 1.0 / 3.0).abs() < METRIC_TOL
        && (micro.f1 - 0.4).abs() < METRIC_TOL;
    check(
        ok,
        format!("macro {macro_f1:.6} (0.5), wrong-direction {flipped} (0), micro P/R/F1 {:.4}/{:.4}/{:.4} (0.5/0.3333/0.4)", micro.precision, micro.recall, micro.f1),
    )
}

fn c8_length_bins() -> Outcome {
    let corpus = generate(&presets::varied(1500, 150, 150, 4)).map_err(e)?;
    let distinct: BTreeSet<usize> = corpus.train.iter().map(|s| s.len()).collect();
    let ds = build_task(TaskId::SentLen, &corpus, &TaskProfile::Tacred).map_err(e)?;
    // Recount bin masses from the written labels, not the library's counter.
    let mut masses = std::collections::BTreeMap::<&str, usize>::new();
    for item in ds.split(Split::Train) {
        *masses.entry(item.label.as_str()).or_default() += 1;
    }
    let lo = masses.values().copied().min().unwrap_or(0).max(1);
    let hi = masses.values().copied().max().unwrap_or(0);
    let ratio = hi as f64 / lo as f64;
    check(
        distinct.len() >= MIN_DISTINCT_LENGTHS && masses.len() == 10 && ratio <= MAX_BIN_RATIO,
        format!("{} distinct lengths, {} bins, max/min mass {ratio:.3} (<= {MAX_BIN_RATIO})", distinct.len(), masses.len()),
    )
}

fn run_suite_cli(dir: &Path, out: &str) -> Result<(Vec<u8>, Vec<u8>), String> {
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "synth = basic\nn_train = 48\nn_val = 12\nn_test = 12\nencoders = cnn,gcn\nepochs = 4\ngrid = 0,0.01,1\njobs = 3\nseed = 9\n",
    )
    .map_err(e)?;
    let status = Command::new(env!("CARGO_BIN_EXE_relprobe"))
        .arg("suite")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join(out))
        .env_remove("RELPROBE_SEED")
        .output()
        .map_err(e)?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let read = |f: &str| std::fs::read(dir.join(out).join(f)).map_err(e);
    Ok((read("suite.csv")?, read("detail.csv")?))
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let a = run_suite_cli(dir.path(), "a")?;
    let b = run_suite_cli(dir.path(), "b")?;
    check(
        a == b && !a.0.is_empty(),
        format!("suite.csv {} bytes, identical: {}; detail.csv identical: {}", a.0.len(), a.0 == b.0, a.1 == b.1),
    )
}

fn c10_masking() -> Outcome {
    let corpus = generate(&presets::basic(32, 8, 8, 5)).map_err(e)?;
    let mut p = preset("desk-small", Some(EncoderKind::Cnn)).map_err(e)?;
    p.profile.epochs = 3;
    p.input.masking = true;
    let (model, _) = train_re(&corpus, &p.input, &p.encoder, &p.profile, None, None, 6).map_err(e)?;
    let renamed = corpus
        .map_sentences(|s| {
            let mut s = s.clone();
            for span in [s.head, s.tail] {
                for i in span.indices() {
                    s.tokens[i] = format!("Xv{i}q");
                }
            }
            s
        })
        .map_err(e)?;
    let a = all_sentences(&corpus);
    let b = all_sentences(&renamed);
    let changed = a.iter().zip(&b).filter(|(x, y)| x.tokens != y.tokens).count();
    let masked_same = a.iter().zip(&b).all(|(x, y)| mask_entities(x).tokens == mask_entities(y).tokens);
    let ha = extract_reps(&model, &a, None, "m").map_err(e)?.hash();
    let hb = extract_reps(&model, &b, None, "m").map_err(e)?.hash();
    check(
        changed == a.len() && masked_same && ha == hb,
        format!("{changed} sentences renamed, hash {} vs {}", &ha[..12], &hb[..12]),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("gradient checks", c1_gradcheck),
        ("tree oracles", c2_trees),
        ("scalar baselines", c3_baselines),
        ("BoE on ArgOrd", c4_boe_argord),
        ("desk-small fit", c5_fit),
        ("entity types", c6_types),
        ("metric fixtures", c7_metrics),
        ("length bins", c8_length_bins),
        ("suite determinism", c9_determinism),
        ("masking invariance", c10_masking),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail} [{:.1}s]", i + 1, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of 10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
