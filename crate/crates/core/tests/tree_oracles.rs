use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relprobe_core::corpus::Span;
use relprobe_core::deptree::{prune, sdp, span_root, tree_depth, DepTree};

const INF: usize = usize::MAX / 4;

/// 1-based heads of a random tree over `n` nodes.
fn random_heads(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut heads = vec![0; n];
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        heads[order[k]] = parent + 1;
    }
    heads
}

fn floyd_warshall(heads: &[usize]) -> Vec<Vec<usize>> {
    let n = heads.len();
    let mut d = vec![vec![INF; n]; n];
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
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn ancestors(heads: &[usize], mut i: usize) -> Vec<usize> {
    let mut out = vec![i];
    while heads[i] > 0 {
        i = heads[i] - 1;
        out.push(i);
    }
    out
}

fn oracle_span_root(heads: &[usize], s: Span) -> usize {
    for i in s.start..=s.end {
        let outside = heads[i] == 0 || !(s.start..=s.end).contains(&(heads[i] - 1));
        if outside {
            return i;
        }
    }
    s.end
}

fn random_spans(n: usize, rng: &mut ChaCha8Rng) -> (Span, Span) {
    loop {
        let mk = |rng: &mut ChaCha8Rng| {
            let a = rng.gen_range(0..n);
            let len = rng.gen_range(0..3).min(n - 1 - a);
            Span::new(a, a + len)
        };
        let (h, t) = (mk(rng), mk(rng));
        if !h.overlaps(&t) {
            return (h, t);
        }
    }
}

fn check_tree(heads: &[usize], head: Span, tail: Span) {
    let t = DepTree::build(heads).unwrap();
    let d = floyd_warshall(heads);
    let (a, b) = (oracle_span_root(heads, head), oracle_span_root(heads, tail));
    assert_eq!((span_root(&t, head), span_root(&t, tail)), (a, b));

    let r = sdp(&t, head, tail);
    assert_eq!(r.path.len(), d[a][b] + 1, "path length for {heads:?}");
    assert_eq!((r.path[0], *r.path.last().unwrap()), (a, b));
    for w in r.path.windows(2) {
        assert_eq!(d[w[0]][w[1]], 1, "non-adjacent hop in {:?}", r.path);
    }
    for (i, &v) in r.path.iter().enumerate() {
        assert_eq!(d[a][v], i);
    }

    let up_a = ancestors(heads, a);
    let up_b = ancestors(heads, b);
    let lca = *up_a.iter().find(|x| up_b.contains(x)).unwrap();
    assert_eq!(r.lca, lca);
    let depth = |x: usize| ancestors(heads, x).len() - 1;
    assert_eq!(r.depth, (depth(a) - depth(lca)).max(depth(b) - depth(lca)));
    assert!(r.depth <= tree_depth(&t));

    for k in 0..=2 {
        let expect: Vec<usize> = (0..heads.len())
            .filter(|&i| r.path.iter().any(|&p| d[i][p] <= k))
            .collect();
        assert_eq!(prune(&t, &r, Some(k)), expect, "K={k} on {heads:?}");
    }
    assert_eq!(prune(&t, &r, None), (0..heads.len()).collect::<Vec<_>>());
}

#[test]
fn thousand_seeded_trees_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let n = rng.gen_range(5..=40);
        let heads = random_heads(n, &mut rng);
        let (h, t) = random_spans(n, &mut rng);
        check_tree(&heads, h, t);
    }
}

#[test]
fn path_tree_extremes() {
    // chain 0 <- 1 <- ... <- 9, root at 0
    let heads: Vec<usize> = (0..10).collect();
    check_tree(&heads, Span::new(9, 9), Span::new(0, 0));
    check_tree(&heads, Span::new(4, 5), Span::new(7, 9));
    // star around token 3
    let star: Vec<usize> = (0..8).map(|i| if i == 3 { 0 } else { 4 }).collect();
    check_tree(&star, Span::new(0, 0), Span::new(7, 7));
}

proptest! {
    #[test]
    fn random_trees(seed in any::<u64>(), n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = random_heads(n, &mut rng);
        let (h, t) = random_spans(n, &mut rng);
        check_tree(&heads, h, t);
    }

    #[test]
    fn prune_is_monotone_in_k(seed in any::<u64>(), n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = random_heads(n, &mut rng);
        let (h, t) = random_spans(n, &mut rng);
        let tree = DepTree::build(&heads).unwrap();
        let r = sdp(&tree, h, t);
        let mut prev = prune(&tree, &r, Some(0));
        prop_assert_eq!(prev.len(), r.path.len());
        for k in 1..5 {
            let cur = prune(&tree, &r, Some(k));
            prop_assert!(prev.iter().all(|i| cur.contains(i)));
            prev = cur;
        }
    }
}
