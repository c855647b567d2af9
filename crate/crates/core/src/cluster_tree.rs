//! Binary cluster trees from longest-axis midpoint splits of bounding boxes.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    /// Smallest box containing the given rows of `coords`.
    pub fn of_rows(coords: &DMatrix<f64>, rows: &[usize]) -> Self {
        let q = coords.ncols();
        let mut lo = vec![f64::INFINITY; q];
        let mut hi = vec![f64::NEG_INFINITY; q];
        for &i in rows {
            for k in 0..q {
                let x = coords[(i, k)];
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        Self { lo, hi }
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn diameter(&self) -> f64 {
        (0..self.lo.len()).map(|k| self.extent(k).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .enumerate()
            .all(|(k, &x)| self.lo[k] <= x && x <= self.hi[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    /// Range into the tree's permutation.
    pub start: usize,
    pub end: usize,
    pub level: usize,
    pub bbox: BoundingBox,
    pub parent: Option<usize>,
    /// Node ids of the children; empty for leaves.
    pub children: Vec<usize>,
}

impl ClusterNode {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Cluster tree over the rows of a coordinate matrix. Nodes are stored in
/// breadth-first order with the root at index 0, so every child has a larger
/// id than its parent.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    nodes: Vec<ClusterNode>,
    permutation: Vec<usize>,
    depth: usize,
    leaf_capacity: usize,
}

impl ClusterTree {
    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &ClusterNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> &ClusterNode {
        &self.nodes[0]
    }

    /// `permutation[position] = point index`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Point indices of a node, in tree order.
    pub fn indices(&self, id: usize) -> &[usize] {
        let n = &self.nodes[id];
        &self.permutation[n.start..n.end]
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }
}

/// Recursive midpoint bisection along the longest bounding-box axis.
///
/// A node stops splitting when it holds at most `leaf_capacity` points or all
/// of its points coincide. If the midpoint split along the longest axis leaves
/// one side empty, the next-longest axis is tried; a node for which every
/// axis fails becomes a leaf.
pub fn build_cluster_tree(coords: &DMatrix<f64>, leaf_capacity: usize) -> Result<ClusterTree> {
    let n = coords.nrows();
    if n == 0 {
        return Err(Error::invalid("cannot build a cluster tree on zero points"));
    }
    if leaf_capacity == 0 {
        return Err(Error::invalid("leaf capacity must be at least 1"));
    }
    let q = coords.ncols();
    let mut permutation: Vec<usize> = (0..n).collect();
    let mut nodes = vec![ClusterNode {
        start: 0,
        end: n,
        level: 0,
        bbox: BoundingBox::of_rows(coords, &permutation),
        parent: None,
        children: Vec::new(),
    }];
    let mut scratch = Vec::new();
    let mut cursor = 0;
    while cursor < nodes.len() {
        let (start, end, level) = (nodes[cursor].start, nodes[cursor].end, nodes[cursor].level);
        let bbox = nodes[cursor].bbox.clone();
        if end - start <= leaf_capacity || (0..q).all(|k| bbox.extent(k) == 0.0) {
            cursor += 1;
            continue;
        }
        let mut axes: Vec<usize> = (0..q).filter(|&k| bbox.extent(k) > 0.0).collect();
        axes.sort_by(|&a, &b| bbox.extent(b).total_cmp(&bbox.extent(a)).then(a.cmp(&b)));
        for axis in axes {
            let mid = bbox.lo[axis] + 0.5 * bbox.extent(axis);
            let range = &permutation[start..end];
            let left = range.iter().filter(|&&i| coords[(i, axis)] <= mid).count();
            if left == 0 || left == end - start {
                continue;
            }
            scratch.clear();
            scratch.extend(range.iter().copied().filter(|&i| coords[(i, axis)] <= mid));
            scratch.extend(range.iter().copied().filter(|&i| coords[(i, axis)] > mid));
            permutation[start..end].copy_from_slice(&scratch);
            let split = start + left;
            for (s, e) in [(start, split), (split, end)] {
                let id = nodes.len();
                nodes.push(ClusterNode {
                    start: s,
                    end: e,
                    level: level + 1,
                    bbox: BoundingBox::of_rows(coords, &permutation[s..e]),
                    parent: Some(cursor),
                    children: Vec::new(),
                });
                nodes[cursor].children.push(id);
            }
            break;
        }
        cursor += 1;
    }
    let depth = nodes.iter().map(|n| n.level).max().unwrap_or(0);
    Ok(ClusterTree {
        nodes,
        permutation,
        depth,
        leaf_capacity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeStats {
    pub depth: usize,
    pub node_count: usize,
    pub leaf_count: usize,
    /// Leaf size -> number of leaves with that size.
    pub leaf_sizes: BTreeMap<usize, usize>,
}

pub fn tree_stats(tree: &ClusterTree) -> TreeStats {
    let mut leaf_sizes = BTreeMap::new();
    for id in tree.leaves() {
        *leaf_sizes.entry(tree.node(id).len()).or_insert(0) += 1;
    }
    TreeStats {
        depth: tree.depth(),
        node_count: tree.nodes().len(),
        leaf_count: leaf_sizes.values().sum(),
        leaf_sizes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(points: &[[f64; 2]]) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), 2, |i, j| points[i][j])
    }

    fn uniform(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>())
    }

    fn check_invariants(tree: &ClusterTree, coords: &DMatrix<f64>) {
        let mut covered = Vec::new();
        for id in tree.leaves() {
            let n = tree.node(id);
            covered.push((n.start, n.end));
        }
        covered.sort();
        let mut at = 0;
        for (s, e) in covered {
            assert_eq!(s, at);
            assert!(e > s);
            at = e;
        }
        assert_eq!(at, coords.nrows());
        for (id, node) in tree.nodes().iter().enumerate() {
            for &i in tree.indices(id) {
                let p: Vec<f64> = coords.row(i).iter().copied().collect();
                assert!(node.bbox.contains(&p));
            }
            if !node.is_leaf() {
                assert_eq!(node.children.len(), 2);
                let (l, r) = (tree.node(node.children[0]), tree.node(node.children[1]));
                assert_eq!((l.start, l.end, r.start, r.end), (node.start, l.end, l.end, node.end));
                assert!(!l.is_empty() && !r.is_empty());
                assert_eq!(l.level, node.level + 1);
                assert!(node.children.iter().all(|&c| c > id));
            }
        }
        let mut perm = tree.permutation().to_vec();
        perm.sort();
        assert_eq!(perm, (0..coords.nrows()).collect::<Vec<_>>());
    }

    #[test]
    fn single_point() {
        let c = matrix(&[[0.3, 0.4]]);
        let t = build_cluster_tree(&c, 1).unwrap();
        assert_eq!(tree_stats(&t).depth, 0);
        assert_eq!(tree_stats(&t).node_count, 1);
    }

    #[test]
    fn square_corners_trace() {
        let c = matrix(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let t = build_cluster_tree(&c, 1).unwrap();
        let stats = tree_stats(&t);
        assert_eq!((stats.depth, stats.node_count, stats.leaf_count), (2, 7, 4));
        // axis 0 first (tie), then axis 1 in each child
        assert_eq!(t.indices(1), &[0, 2]);
        assert_eq!(t.indices(2), &[1, 3]);
        assert_eq!(t.indices(3), &[0]);
        assert_eq!(t.indices(4), &[2]);
        assert_eq!(t.indices(5), &[1]);
        assert_eq!(t.indices(6), &[3]);
        check_invariants(&t, &c);
    }

    #[test]
    fn coincident_points_form_one_leaf() {
        let c = DMatrix::from_fn(100, 3, |_, k| k as f64 * 0.5);
        let t = build_cluster_tree(&c, 4).unwrap();
        assert_eq!(t.nodes().len(), 1);
    }

    #[test]
    fn dyadic_line_depth() {
        for k in 3..10 {
            let n = 1usize << k;
            let c = DMatrix::from_fn(n, 1, |i, _| i as f64 + 0.5);
            let t = build_cluster_tree(&c, 1).unwrap();
            assert_eq!(t.depth(), k);
            assert_eq!(tree_stats(&t).node_count, 2 * n - 1);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_cluster_tree(&DMatrix::zeros(0, 2), 1).is_err());
        assert!(build_cluster_tree(&DMatrix::zeros(3, 2), 0).is_err());
    }

    #[test]
    fn uniform_square_is_balanced() {
        for &n in &[1000usize, 20000, 100000] {
            let c = uniform(n, n as u64);
            let t = build_cluster_tree(&c, 1).unwrap();
            assert!((t.depth() as f64) <= 2.0 * (n as f64).log2(), "n {n} depth {}", t.depth());
        }
    }

    proptest::proptest! {
        #[test]
        fn invariants_hold(seed in 0u64..500, n in 1usize..300, cap in 1usize..12) {
            let mut c = uniform(n, seed);
            // a few duplicates
            if n > 3 {
                for k in 0..2 {
                    c[(n - 1, k)] = c[(0, k)];
                }
            }
            let t = build_cluster_tree(&c, cap).unwrap();
            check_invariants(&t, &c);
            for id in t.leaves() {
                let node = t.node(id);
                proptest::prop_assert!(node.len() <= cap || node.bbox.diameter() == 0.0);
            }
        }
    }
}
