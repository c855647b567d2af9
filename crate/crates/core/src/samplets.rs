//! Samplet bases on embedded patches: moment matrices, QR-derived filters, the
//! fast recursive transform and its block-diagonal forest version.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::cluster_tree::{build_cluster_tree, ClusterTree};
use crate::error::{Error, Result};
use crate::linalg::{householder_qr, QrFactors, QrSigns};

/// All multi-indices of total degree at most `s` in `q` variables, in graded
/// lexicographic order: by total degree, then lexicographically descending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    q: usize,
    s: usize,
    indices: Vec<Vec<u32>>,
}

impl MultiIndexSet {
    pub fn new(q: usize, s: usize) -> Self {
        fn fill(prefix: &mut Vec<u32>, left: usize, degree: u32, out: &mut Vec<Vec<u32>>) {
            if left == 1 {
                prefix.push(degree);
                out.push(prefix.clone());
                prefix.pop();
                return;
            }
            for first in (0..=degree).rev() {
                prefix.push(first);
                fill(prefix, left - 1, degree - first, out);
                prefix.pop();
            }
        }
        let mut indices = Vec::with_capacity(binomial(s + q, q));
        if q == 0 {
            indices.push(Vec::new());
        } else {
            for degree in 0..=s as u32 {
                fill(&mut Vec::with_capacity(q), q, degree, &mut indices);
            }
        }
        Self { q, s, indices }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    /// `m_s = C(s + q, q)`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Moment matrix of the rows of `points` (`n x q`): entry `(alpha, i)` is
/// `points_i ^ alpha`, rows ordered as in `mis`.
pub fn moment_matrix(points: &DMatrix<f64>, mis: &MultiIndexSet) -> DMatrix<f64> {
    let (n, q) = points.shape();
    assert_eq!(q, mis.q(), "point dimension must match the multi-index set");
    let s = mis.s();
    let mut m = DMatrix::zeros(mis.len(), n);
    let mut powers = vec![1.0; q * (s + 1)];
    for i in 0..n {
        for k in 0..q {
            let x = points[(i, k)];
            for e in 1..=s {
                powers[k * (s + 1) + e] = powers[k * (s + 1) + e - 1] * x;
            }
        }
        for (row, alpha) in mis.indices().iter().enumerate() {
            m[(row, i)] = alpha
                .iter()
                .enumerate()
                .fold(1.0, |acc, (k, &e)| acc * powers[k * (s + 1) + e as usize]);
        }
    }
    m
}

/// Filters of one cluster: `q = [Q_phi Q_psi]` is the full orthogonal factor of
/// the QR decomposition of the transposed children moment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFilters {
    pub q: DMatrix<f64>,
    pub n_scaling: usize,
    /// Moments of this node's scaling distributions, `m_s x n_scaling`.
    pub m_phi: DMatrix<f64>,
}

impl NodeFilters {
    pub fn n_children_total(&self) -> usize {
        self.q.nrows()
    }

    pub fn n_samplets(&self) -> usize {
        self.q.ncols() - self.n_scaling
    }

    pub fn q_phi(&self) -> DMatrix<f64> {
        self.q.columns(0, self.n_scaling).into_owned()
    }

    pub fn q_psi(&self) -> DMatrix<f64> {
        self.q.columns(self.n_scaling, self.n_samplets()).into_owned()
    }
}

/// QR of `M^T` for an `m_s x n` moment matrix `M`.
pub fn compute_filters(m_children: &DMatrix<f64>, signs: QrSigns) -> NodeFilters {
    let (ms, n) = m_children.shape();
    let QrFactors { q, r } = householder_qr(&m_children.transpose(), signs);
    let n_scaling = n.min(ms);
    let m_phi = r.rows(0, n_scaling).transpose();
    NodeFilters { q, n_scaling, m_phi }
}

/// Affine map of a patch's embedded coordinates onto `[-1, 1]^q`: translation
/// to the bounding-box center and one uniform scale from the longest edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchFrame {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl PatchFrame {
    pub fn fit(coords: &DMatrix<f64>) -> Self {
        let q = coords.ncols();
        let mut center = vec![0.0; q];
        let mut longest = 0.0f64;
        for k in 0..q {
            let col = coords.column(k);
            let (lo, hi) = (col.min(), col.max());
            center[k] = 0.5 * (lo + hi);
            longest = longest.max(hi - lo);
        }
        let scale = if longest > 0.0 { 2.0 / longest } else { 1.0 };
        Self { center, scale }
    }

    pub fn apply(&self, coords: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(coords.nrows(), coords.ncols(), |i, k| {
            (coords[(i, k)] - self.center[k]) * self.scale
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampletOptions {
    /// Maximal total degree of the annihilated polynomials; `s + 1` vanishing moments.
    pub s: usize,
    /// Defaults to `2 m_s`.
    pub leaf_capacity: Option<usize>,
    pub signs: QrSigns,
}

impl SampletOptions {
    pub fn with_moments(s_plus_1: usize) -> Result<Self> {
        if s_plus_1 == 0 {
            return Err(Error::invalid("the number of vanishing moments must be at least 1"));
        }
        Ok(Self {
            s: s_plus_1 - 1,
            leaf_capacity: None,
            signs: QrSigns::NonNegativeDiagonal,
        })
    }

    pub fn leaf_capacity_for(&self, q: usize) -> usize {
        self.leaf_capacity.unwrap_or(2 * binomial(self.s + q, q))
    }
}

/// Samplet basis of one patch.
#[derive(Debug, Clone)]
pub struct SampletTree {
    tree: ClusterTree,
    frame: PatchFrame,
    coords: DMatrix<f64>,
    normalized: DMatrix<f64>,
    mis: MultiIndexSet,
    filters: Vec<NodeFilters>,
    samplet_offset: Vec<usize>,
}

/// Builds filters bottom-up over `tree`, which must index the rows of `coords`.
pub fn build_samplet_tree(tree: ClusterTree, coords: &DMatrix<f64>, s: usize, signs: QrSigns) -> Result<SampletTree> {
    if tree.len() != coords.nrows() {
        return Err(Error::invalid(format!(
            "cluster tree covers {} points but {} coordinates were given",
            tree.len(),
            coords.nrows()
        )));
    }
    let frame = PatchFrame::fit(coords);
    let normalized = frame.apply(coords);
    let mis = MultiIndexSet::new(coords.ncols(), s);
    let nodes = tree.nodes();
    let mut filters: Vec<Option<NodeFilters>> = vec![None; nodes.len()];
    for id in (0..nodes.len()).rev() {
        let node = &nodes[id];
        let m = if node.is_leaf() {
            let rows = tree.indices(id);
            let pts = DMatrix::from_fn(rows.len(), coords.ncols(), |i, k| normalized[(rows[i], k)]);
            moment_matrix(&pts, &mis)
        } else {
            let blocks: Vec<&DMatrix<f64>> = node
                .children
                .iter()
                .map(|&c| &filters[c].as_ref().expect("children precede parents in reverse BFS").m_phi)
                .collect();
            let cols = blocks.iter().map(|b| b.ncols()).sum();
            let mut m = DMatrix::zeros(mis.len(), cols);
            let mut at = 0;
            for b in blocks {
                m.columns_mut(at, b.ncols()).copy_from(b);
                at += b.ncols();
            }
            m
        };
        filters[id] = Some(compute_filters(&m, signs));
    }
    let filters: Vec<NodeFilters> = filters.into_iter().map(|f| f.expect("every node visited")).collect();
    let mut samplet_offset = Vec::with_capacity(filters.len());
    let mut at = filters[0].n_scaling;
    for f in &filters {
        samplet_offset.push(at);
        at += f.n_samplets();
    }
    debug_assert_eq!(at, tree.len());
    Ok(SampletTree {
        tree,
        frame,
        coords: coords.clone(),
        normalized,
        mis,
        filters,
        samplet_offset,
    })
}

impl SampletTree {
    /// Normalizes `coords`, builds the cluster tree and the filters.
    pub fn from_embedding(coords: &DMatrix<f64>, options: &SampletOptions) -> Result<Self> {
        let frame = PatchFrame::fit(coords);
        let tree = build_cluster_tree(&frame.apply(coords), options.leaf_capacity_for(coords.ncols()))?;
        build_samplet_tree(tree, coords, options.s, options.signs)
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn frame(&self) -> &PatchFrame {
        &self.frame
    }

    /// Embedded patch coordinates, in local point order.
    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// Patch coordinates in the normalized frame, in local point order.
    pub fn normalized_coords(&self) -> &DMatrix<f64> {
        &self.normalized
    }

    pub fn mis(&self) -> &MultiIndexSet {
        &self.mis
    }

    pub fn filters(&self) -> &[NodeFilters] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn n_root_scaling(&self) -> usize {
        self.filters[0].n_scaling
    }

    /// Coefficient positions of the samplets attached to `node`.
    pub fn samplet_range(&self, node: usize) -> Range<usize> {
        let start = self.samplet_offset[node];
        start..start + self.filters[node].n_samplets()
    }

    /// Coefficient positions attached to `node`; the root also owns the
    /// root scaling coefficients.
    pub fn node_positions(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if node == 0 {
            out.extend(0..self.n_root_scaling());
        }
        out.extend(self.samplet_range(node));
        out
    }

    /// `T_r f` for values given in local point order.
    pub fn forward(&self, values: &[f64]) -> Vec<f64> {
        let nodes = self.tree.nodes();
        let perm = self.tree.permutation();
        let mut out = vec![0.0; self.len()];
        let mut scaling: Vec<Vec<f64>> = vec![Vec::new(); nodes.len()];
        for id in (0..nodes.len()).rev() {
            let node = &nodes[id];
            let input: Vec<f64> = if node.is_leaf() {
                perm[node.start..node.end].iter().map(|&i| values[i]).collect()
            } else {
                let mut v = Vec::with_capacity(self.filters[id].n_children_total());
                for &c in &node.children {
                    v.append(&mut scaling[c]);
                }
                v
            };
            let f = &self.filters[id];
            let y = f.q.tr_mul(&DVector::from_vec(input));
            out[self.samplet_range(id)].copy_from_slice(&y.as_slice()[f.n_scaling..]);
            scaling[id] = y.as_slice()[..f.n_scaling].to_vec();
        }
        out[..self.n_root_scaling()].copy_from_slice(&scaling[0]);
        out
    }

    /// `T_r^T c`, returned in local point order.
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let nodes = self.tree.nodes();
        let perm = self.tree.permutation();
        let mut out = vec![0.0; self.len()];
        let mut scaling: Vec<Vec<f64>> = vec![Vec::new(); nodes.len()];
        scaling[0] = coeffs[..self.n_root_scaling()].to_vec();
        for (id, node) in nodes.iter().enumerate() {
            let f = &self.filters[id];
            let mut input = std::mem::take(&mut scaling[id]);
            input.extend_from_slice(&coeffs[self.samplet_range(id)]);
            let y = &f.q * DVector::from_vec(input);
            if node.is_leaf() {
                for (k, &i) in perm[node.start..node.end].iter().enumerate() {
                    out[i] = y[k];
                }
            } else {
                let mut at = 0;
                for &c in &node.children {
                    let len = self.filters[c].n_scaling;
                    scaling[c] = y.as_slice()[at..at + len].to_vec();
                    at += len;
                }
            }
        }
        out
    }

    /// Calls `visit(node, samplet_weights)` for every node, bottom-up, where
    /// column `k` of `samplet_weights` holds the weights of the node's `k`-th
    /// samplet over the node's points in tree order.
    pub fn visit_samplet_weights(&self, mut visit: impl FnMut(usize, &DMatrix<f64>)) -> DMatrix<f64> {
        let nodes = self.tree.nodes();
        let mut scaling: Vec<Option<DMatrix<f64>>> = vec![None; nodes.len()];
        for id in (0..nodes.len()).rev() {
            let node = &nodes[id];
            let f = &self.filters[id];
            let w = if node.is_leaf() {
                f.q.clone()
            } else {
                let mut basis = DMatrix::zeros(node.len(), f.n_children_total());
                let (mut row, mut col) = (0, 0);
                for &c in &node.children {
                    let child = scaling[c].take().expect("children precede parents in reverse BFS");
                    basis.view_mut((row, col), child.shape()).copy_from(&child);
                    row += child.nrows();
                    col += child.ncols();
                }
                basis * &f.q
            };
            visit(id, &w.columns(f.n_scaling, f.n_samplets()).into_owned());
            scaling[id] = Some(w.columns(0, f.n_scaling).into_owned());
        }
        scaling[0].take().expect("root visited")
    }

    /// The transform as an explicit `N_r x N_r` matrix: row `k` holds the
    /// weights of the basis element at coefficient position `k` over the
    /// points in local order.
    pub fn assemble_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut t = DMatrix::zeros(n, n);
        let tree = &self.tree;
        let root_scaling = self.visit_samplet_weights(|id, w| {
            let points = tree.indices(id);
            for (k, pos) in self.samplet_range(id).enumerate() {
                for (r, &i) in points.iter().enumerate() {
                    t[(pos, i)] = w[(r, k)];
                }
            }
        });
        for k in 0..root_scaling.ncols() {
            for (r, &i) in tree.indices(0).iter().enumerate() {
                t[(k, i)] = root_scaling[(r, k)];
            }
        }
        t
    }
}

/// `X^alpha` at a point, by direct multiplication.
pub fn monomial(point: &[f64], alpha: &[u32]) -> f64 {
    point.iter().zip(alpha).map(|(&x, &e)| x.powi(e as i32)).product()
}

/// Worst vanishing-moment residuals over every samplet of a tree, by direct
/// summation of `sum_i w_i zeta_i^alpha` in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MomentResidual {
    /// `max |<psi, X^alpha>|`.
    pub max_abs: f64,
    /// `max |<psi, X^alpha>| / (max_i |zeta_i^alpha| sqrt(n))`.
    pub max_relative: f64,
    /// `max | |psi|_2 - 1 |`.
    pub max_norm_defect: f64,
    pub samplets: usize,
}

impl MomentResidual {
    pub fn merge(self, other: Self) -> Self {
        Self {
            max_abs: self.max_abs.max(other.max_abs),
            max_relative: self.max_relative.max(other.max_relative),
            max_norm_defect: self.max_norm_defect.max(other.max_norm_defect),
            samplets: self.samplets + other.samplets,
        }
    }
}

pub fn moment_residuals(tree: &SampletTree) -> MomentResidual {
    let mut res = MomentResidual::default();
    let pts = tree.normalized_coords();
    let q = pts.ncols();
    let mut point = vec![0.0; q];
    tree.visit_samplet_weights(|id, w| {
        let idx = tree.tree().indices(id);
        let n = idx.len();
        for alpha in tree.mis().indices() {
            let mut values = Vec::with_capacity(n);
            for &i in idx {
                for k in 0..q {
                    point[k] = pts[(i, k)];
                }
                values.push(monomial(&point, alpha));
            }
            let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())) * (n as f64).sqrt();
            for k in 0..w.ncols() {
                let dot: f64 = values.iter().enumerate().map(|(r, v)| w[(r, k)] * v).sum();
                res.max_abs = res.max_abs.max(dot.abs());
                if scale > 0.0 {
                    res.max_relative = res.max_relative.max(dot.abs() / scale);
                }
            }
        }
        for k in 0..w.ncols() {
            res.max_norm_defect = res.max_norm_defect.max((w.column(k).norm() - 1.0).abs());
        }
        res.samplets += w.ncols();
    });
    res
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    Scaling,
    Samplet,
}

impl CoefficientKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Scaling => "scaling",
            Self::Samplet => "samplet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoefficientTag {
    pub patch: usize,
    pub node: usize,
    pub kind: CoefficientKind,
    pub level: usize,
    pub local_index: usize,
}

/// Coefficients in forest layout with one tag per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub values: Vec<f64>,
    pub tags: Vec<CoefficientTag>,
}

/// Per-patch samplet trees with a patch-major global coefficient layout.
#[derive(Debug, Clone)]
pub struct SampletForest {
    trees: Vec<SampletTree>,
    vertices: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    n: usize,
}

impl SampletForest {
    /// `patches[r] = (global vertex ids, embedded coordinates with one row per vertex)`;
    /// the vertex lists must partition `0..n`.
    pub fn build(n: usize, patches: Vec<(Vec<usize>, DMatrix<f64>)>, options: &SampletOptions) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::invalid("a samplet forest needs at least one patch"));
        }
        let mut seen = vec![false; n];
        for (r, (vertices, coords)) in patches.iter().enumerate() {
            if vertices.is_empty() || vertices.len() != coords.nrows() {
                return Err(Error::invalid(format!(
                    "patch {r} has {} vertices and {} coordinate rows",
                    vertices.len(),
                    coords.nrows()
                )));
            }
            for &v in vertices {
                if v >= n || std::mem::replace(&mut seen[v], true) {
                    return Err(Error::invalid(format!("vertex {v} is out of range or repeated in patch {r}")));
                }
            }
        }
        if let Some(v) = seen.iter().position(|&s| !s) {
            return Err(Error::invalid(format!("vertex {v} is not covered by any patch")));
        }
        let trees = patches
            .par_iter()
            .map(|(_, coords)| SampletTree::from_embedding(coords, options))
            .collect::<Result<Vec<_>>>()?;
        let vertices: Vec<Vec<usize>> = patches.into_iter().map(|(v, _)| v).collect();
        let mut offsets = Vec::with_capacity(vertices.len() + 1);
        let mut at = 0;
        for v in &vertices {
            offsets.push(at);
            at += v.len();
        }
        offsets.push(at);
        Ok(Self { trees, vertices, offsets, n })
    }

    pub fn trees(&self) -> &[SampletTree] {
        &self.trees
    }

    pub fn patch_vertices(&self, patch: usize) -> &[usize] {
        &self.vertices[patch]
    }

    /// Global coefficient range of a patch.
    pub fn patch_range(&self, patch: usize) -> Range<usize> {
        self.offsets[patch]..self.offsets[patch + 1]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn tags(&self) -> Vec<CoefficientTag> {
        let mut tags = Vec::with_capacity(self.n);
        for (patch, tree) in self.trees.iter().enumerate() {
            for local_index in 0..tree.n_root_scaling() {
                tags.push(CoefficientTag {
                    patch,
                    node: 0,
                    kind: CoefficientKind::Scaling,
                    level: 0,
                    local_index,
                });
            }
            for (node, info) in tree.tree().nodes().iter().enumerate() {
                for local_index in 0..tree.samplet_range(node).len() {
                    tags.push(CoefficientTag {
                        patch,
                        node,
                        kind: CoefficientKind::Samplet,
                        level: info.level,
                        local_index,
                    });
                }
            }
        }
        tags
    }

    /// `T f` for a signal indexed by global vertex id.
    pub fn forward(&self, signal: &[f64]) -> Result<CoefficientVector> {
        if signal.len() != self.n {
            return Err(Error::invalid(format!(
                "signal has length {} but the forest covers {} vertices",
                signal.len(),
                self.n
            )));
        }
        let blocks: Vec<Vec<f64>> = self
            .trees
            .par_iter()
            .zip(&self.vertices)
            .map(|(tree, vertices)| {
                let local: Vec<f64> = vertices.iter().map(|&v| signal[v]).collect();
                tree.forward(&local)
            })
            .collect();
        Ok(CoefficientVector {
            values: blocks.concat(),
            tags: self.tags(),
        })
    }

    /// `T^T c` for coefficients in forest layout.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.n {
            return Err(Error::invalid(format!(
                "coefficient vector has length {} but the forest has {} coefficients",
                coeffs.len(),
                self.n
            )));
        }
        let blocks: Vec<Vec<f64>> = self
            .trees
            .par_iter()
            .enumerate()
            .map(|(r, tree)| tree.inverse(&coeffs[self.patch_range(r)]))
            .collect();
        let mut out = vec![0.0; self.n];
        for (vertices, block) in self.vertices.iter().zip(blocks) {
            for (&v, x) in vertices.iter().zip(block) {
                out[v] = x;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelDecay {
    pub level: usize,
    pub max_abs: f64,
    pub count: usize,
}

/// Largest samplet coefficient and samplet count per tree level, across the forest.
pub fn decay_report(forest: &SampletForest, coeffs: &[f64]) -> Vec<LevelDecay> {
    let mut levels: Vec<LevelDecay> = Vec::new();
    for row in node_decay(forest, coeffs) {
        if row.count == 0 {
            continue;
        }
        while levels.len() <= row.level {
            levels.push(LevelDecay {
                level: levels.len(),
                max_abs: 0.0,
                count: 0,
            });
        }
        let l = &mut levels[row.level];
        l.max_abs = l.max_abs.max(row.max_abs);
        l.count += row.count;
    }
    levels
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeDecay {
    pub patch: usize,
    pub node: usize,
    pub level: usize,
    /// Bounding-box diameter in embedded coordinates.
    pub diameter: f64,
    pub size: usize,
    pub max_abs: f64,
    pub count: usize,
}

/// Largest samplet coefficient of every node of every patch.
pub fn node_decay(forest: &SampletForest, coeffs: &[f64]) -> Vec<NodeDecay> {
    let mut out = Vec::new();
    for (patch, tree) in forest.trees().iter().enumerate() {
        let base = forest.patch_range(patch).start;
        for (id, node) in tree.tree().nodes().iter().enumerate() {
            let range = tree.samplet_range(id);
            let max_abs = coeffs[base + range.start..base + range.end]
                .iter()
                .fold(0.0f64, |a, c| a.max(c.abs()));
            out.push(NodeDecay {
                patch,
                node: id,
                level: node.level,
                diameter: node.bbox.diameter() / tree.frame().scale,
                size: node.len(),
                max_abs,
                count: range.len(),
            });
        }
    }
    out
}
