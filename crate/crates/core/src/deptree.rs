//! Dependency-tree algorithms over 0-based token indices.

use std::collections::VecDeque;

use crate::corpus::Span;
use crate::error::{Error, Result};

/// Rooted dependency tree. Node `i` is token `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepTree {
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl DepTree {
    /// Builds a tree from 1-based parent indices where `0` marks the root.
    pub fn build(dep_head: &[usize]) -> Result<Self> {
        let n = dep_head.len();
        if n == 0 {
            return Err(Error::Tree("empty sentence".into()));
        }
        if let Some((i, &h)) = dep_head.iter().enumerate().find(|(_, &h)| h > n) {
            return Err(Error::Tree(format!("parent index {h} out of range at token {i}")));
        }
        let roots: Vec<usize> = (0..n).filter(|&i| dep_head[i] == 0).collect();
        match roots.len() {
            0 => return Err(Error::Tree("no root token".into())),
            1 => {}
            _ => return Err(Error::Tree(format!("multiple root tokens {roots:?}"))),
        }
        let root = roots[0];
        let parent: Vec<Option<usize>> = dep_head.iter().map(|&h| h.checked_sub(1)).collect();
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(i);
            }
        }

        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &c in &children[u] {
                depth[c] = depth[u] + 1;
                queue.push_back(c);
            }
        }
        let unreached: Vec<usize> = (0..n).filter(|&i| depth[i] == usize::MAX).collect();
        if !unreached.is_empty() {
            return Err(Error::Tree(format!("cycle through tokens {unreached:?}")));
        }
        Ok(Self {
            root,
            parent,
            children,
            depth,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Edges between `i` and the root.
    pub fn depth_of(&self, i: usize) -> usize {
        self.depth[i]
    }

    /// Tree neighbours of `i` (parent first, then children).
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent[i].into_iter().chain(self.children[i].iter().copied())
    }

    /// Serializes back to 1-based parents with `0` for the root.
    pub fn to_dep_head(&self) -> Vec<usize> {
        self.parent.iter().map(|p| p.map_or(0, |p| p + 1)).collect()
    }
}

/// Maximum number of edges on any root-to-leaf path.
pub fn tree_depth(t: &DepTree) -> usize {
    t.depth.iter().copied().max().unwrap_or(0)
}

/// The token of `span` whose parent lies outside it. With several such
/// tokens the leftmost wins; with none, the span end.
pub fn span_root(t: &DepTree, span: Span) -> usize {
    (span.start..=span.end)
        .find(|&i| t.parent(i).is_none_or(|p| !span.contains(p)))
        .unwrap_or(span.end)
}

/// Shortest dependency path between the roots of the two argument spans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdpResult {
    /// Token indices from the head span root to the tail span root.
    pub path: Vec<usize>,
    /// Deepest common ancestor of the two endpoints.
    pub lca: usize,
    /// `max(edges lca→head root, edges lca→tail root)`.
    pub depth: usize,
}

pub fn sdp(t: &DepTree, head: Span, tail: Span) -> SdpResult {
    let (from, to) = (span_root(t, head), span_root(t, tail));
    let (mut a, mut b) = (from, to);
    let mut up_a = vec![a];
    let mut up_b = vec![b];
    while t.depth_of(a) > t.depth_of(b) {
        a = t.parent(a).expect("non-root has a parent");
        up_a.push(a);
    }
    while t.depth_of(b) > t.depth_of(a) {
        b = t.parent(b).expect("non-root has a parent");
        up_b.push(b);
    }
    while a != b {
        a = t.parent(a).expect("distinct nodes at equal depth are below the root");
        b = t.parent(b).expect("distinct nodes at equal depth are below the root");
        up_a.push(a);
        up_b.push(b);
    }
    let lca = a;
    let depth = (up_a.len() - 1).max(up_b.len() - 1);
    up_b.pop();
    up_a.extend(up_b.into_iter().rev());
    SdpResult {
        path: up_a,
        lca,
        depth,
    }
}

/// Tokens within undirected tree distance `k` of the path; `None` keeps
/// every token. Returned in ascending order.
pub fn prune(t: &DepTree, path: &SdpResult, k: Option<usize>) -> Vec<usize> {
    let Some(k) = k else {
        return (0..t.len()).collect();
    };
    let dist = distances_from(t, &path.path);
    (0..t.len()).filter(|&i| dist[i] <= k).collect()
}

/// Multi-source BFS distance from the nearest of `sources`.
pub fn distances_from(t: &DepTree, sources: &[usize]) -> Vec<usize> {
    let mut dist = vec![usize::MAX; t.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if dist[s] != 0 {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for v in t.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(start: usize, end: usize) -> Span {
        Span::new(start, end)
    }

    #[test]
    fn builds_small_tree() {
        let t = DepTree::build(&[2, 0, 2]).unwrap();
        assert_eq!(t.root(), 1);
        assert_eq!(t.children(1), &[0, 2]);
        assert_eq!(t.to_dep_head(), vec![2, 0, 2]);
    }

    #[test]
    fn single_node_tree() {
        let t = DepTree::build(&[0]).unwrap();
        assert_eq!(t.root(), 0);
        assert_eq!(tree_depth(&t), 0);
    }

    #[test]
    fn rejects_rootless_and_multi_rooted() {
        assert!(DepTree::build(&[2, 1]).unwrap_err().to_string().contains("no root"));
        assert!(DepTree::build(&[0, 0]).unwrap_err().to_string().contains("multiple root"));
        assert!(DepTree::build(&[0, 3, 2]).unwrap_err().to_string().contains("cycle"));
        assert!(DepTree::build(&[0, 9]).unwrap_err().to_string().contains("out of range"));
    }

    #[test]
    fn chain_depth() {
        let t = DepTree::build(&[0, 1, 2]).unwrap();
        assert_eq!(tree_depth(&t), 2);
    }

    #[test]
    fn span_roots() {
        // "Google CEO Larry Page resigned": Larry -> Page -> resigned.
        let t = DepTree::build(&[2, 4, 4, 5, 0]).unwrap();
        assert_eq!(span_root(&t, span(0, 0)), 0);
        assert_eq!(span_root(&t, span(2, 3)), 3);
        // Degenerate: whole sentence as a span, root inside, parent None.
        assert_eq!(span_root(&t, span(0, 4)), 4);
    }

    #[test]
    fn span_root_falls_back_to_span_end() {
        // A valid tree always has an exit token, so build the cyclic
        // parent structure directly.
        let t = DepTree {
            root: 2,
            parent: vec![Some(1), Some(0), None],
            children: vec![vec![1], vec![0], vec![]],
            depth: vec![0, 0, 0],
        };
        assert_eq!(span_root(&t, span(0, 1)), 1);
    }

    #[test]
    fn sdp_three_tokens() {
        let t = DepTree::build(&[2, 0, 2]).unwrap();
        let r = sdp(&t, span(0, 0), span(2, 2));
        assert_eq!(r.path, vec![0, 1, 2]);
        assert_eq!(r.lca, 1);
        assert_eq!(r.depth, 1);
    }

    #[test]
    fn sdp_to_descendant() {
        // 0 <- 1 <- 2 <- 3 (root 0): head at 0, tail at 3.
        let t = DepTree::build(&[0, 1, 2, 3]).unwrap();
        let r = sdp(&t, span(0, 0), span(3, 3));
        assert_eq!(r.lca, 0);
        assert_eq!(r.depth, 3);
        assert_eq!(r.path, vec![0, 1, 2, 3]);
        let rev = sdp(&t, span(3, 3), span(0, 0));
        assert_eq!(rev.path, vec![3, 2, 1, 0]);
    }

    #[test]
    fn prune_radius() {
        // root 0 with chain 0-1-2-3 and leaf 4 under 3, leaf 5 under 0.
        let t = DepTree::build(&[0, 1, 2, 3, 4, 1]).unwrap();
        let p = sdp(&t, span(1, 1), span(2, 2));
        assert_eq!(prune(&t, &p, Some(0)), vec![1, 2]);
        assert_eq!(prune(&t, &p, Some(1)), vec![0, 1, 2, 3]);
        assert_eq!(prune(&t, &p, None), (0..6).collect::<Vec<_>>());
    }
}
