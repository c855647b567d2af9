//! Weighted graphs, ε-ball graph construction and graph distances.
//!
//! Edge weights are distances: a short edge means strongly coupled vertices.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Maximal number of axes the spatial grid is built on.
const MAX_GRID_AXES: usize = 8;

/// `N` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("point cloud must contain at least one point"))?;
        let mut coords = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::invalid(format!(
                    "point {i} has dimension {} but point 0 has dimension {dim}",
                    p.len()
                )));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates do not form a nonempty set of {dim}-dimensional points",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }
}

/// Euclidean distance; the single distance kernel used for edge weights.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Undirected graph with nonnegative distance weights in compressed sparse row form.
///
/// Neighbor lists are sorted by id, free of duplicates and self-loops, and symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl WeightedGraph {
    /// Builds a graph from undirected edges. Each edge may be listed once or in
    /// both directions, but repeated listings must carry the same weight.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) out of range for {n} vertices")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop at vertex {u}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!("edge ({u}, {v}) has invalid weight {w}")));
            }
            lists[u].push((v, w));
            lists[v].push((u, w));
        }
        for (u, list) in lists.iter_mut().enumerate() {
            list.sort_by_key(|a| a.0);
            let mut deduped: Vec<(usize, f64)> = Vec::with_capacity(list.len());
            for &(v, w) in list.iter() {
                match deduped.last() {
                    Some(&(pv, pw)) if pv == v => {
                        if pw != w {
                            return Err(Error::invalid(format!(
                                "edge ({u}, {v}) listed with conflicting weights {pw} and {w}"
                            )));
                        }
                    }
                    _ => deduped.push((v, w)),
                }
            }
            *list = deduped;
        }
        Ok(Self::from_sorted_lists(lists))
    }

    /// Assumes every list is sorted, duplicate-free and the whole is symmetric.
    fn from_sorted_lists(lists: Vec<Vec<(usize, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let total: usize = lists.iter().map(Vec::len).sum();
        let mut targets = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for list in lists {
            for (v, w) in list {
                targets.push(v);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Self {
            offsets,
            targets,
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[v]..self.offsets[v + 1];
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Undirected edges `(u, v, w)` with `u < v`, sorted lexicographically.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |u| self.neighbors(u).filter(move |&(v, _)| u < v).map(move |(v, w)| (u, v, w)))
    }

    /// Weight of edge `(u, v)` if present.
    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.targets[r.clone()]
            .binary_search(&v)
            .ok()
            .map(|k| self.weights[r.start + k])
    }

    /// Subgraph induced by `vertices`; local id `i` corresponds to `vertices[i]`.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> WeightedGraph {
        let mut local = HashMap::with_capacity(vertices.len());
        for (i, &v) in vertices.iter().enumerate() {
            local.insert(v, i);
        }
        let lists = vertices
            .iter()
            .map(|&v| {
                let mut list: Vec<(usize, f64)> = self
                    .neighbors(v)
                    .filter_map(|(u, w)| local.get(&u).map(|&lu| (lu, w)))
                    .collect();
                list.sort_by_key(|a| a.0);
                list
            })
            .collect();
        Self::from_sorted_lists(lists)
    }
}

/// Result of an ε-ball graph build.
#[derive(Debug, Clone)]
pub struct EpsilonGraph {
    pub graph: WeightedGraph,
    /// Pairs of coincident points whose zero-length edge was dropped.
    pub dropped_duplicates: usize,
}

/// Connects every pair with `0 < |x_i - x_j| <= epsilon`, weighted by the distance.
///
/// Candidate pairs come from a uniform grid of cell size `epsilon` laid over (at
/// most eight) principal axes of the cloud; the full-dimensional distance
/// decides. Projections onto orthonormal axes never increase distances, so a
/// pair within `epsilon` always lies in adjacent cells.
pub fn build_epsilon_graph(cloud: &PointCloud, epsilon: f64) -> Result<EpsilonGraph> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let n = cloud.len();
    let proj = grid_projection(cloud, epsilon);
    let g = proj.len() / n;
    let cell = epsilon * (1.0 + 1e-9);

    let mut mins = vec![f64::INFINITY; g];
    for i in 0..n {
        for k in 0..g {
            mins[k] = mins[k].min(proj[i * g + k]);
        }
    }
    let key_of = |i: usize| -> Vec<i64> {
        (0..g)
            .map(|k| ((proj[i * g + k] - mins[k]) / cell).floor() as i64)
            .collect()
    };
    let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for i in 0..n {
        cells.entry(key_of(i)).or_default().push(i);
    }
    let mut keys: Vec<&Vec<i64>> = cells.keys().collect();
    keys.sort();

    let offsets = neighbor_offsets(g);
    let per_cell: Vec<(Vec<(usize, Vec<(usize, f64)>)>, usize)> = keys
        .par_iter()
        .map(|key| {
            let members = &cells[*key];
            let mut candidates: Vec<usize> = Vec::new();
            let mut probe = (*key).clone();
            for off in &offsets {
                for k in 0..g {
                    probe[k] = key[k] + off[k];
                }
                if let Some(list) = cells.get(&probe) {
                    candidates.extend_from_slice(list);
                }
            }
            candidates.sort_unstable();
            let mut dups = 0;
            let lists = members
                .iter()
                .map(|&i| {
                    let xi = cloud.point(i);
                    let mut list = Vec::new();
                    for &j in &candidates {
                        if j == i {
                            continue;
                        }
                        let d = euclidean(xi, cloud.point(j));
                        if d == 0.0 {
                            if i < j {
                                dups += 1;
                            }
                        } else if d <= epsilon {
                            list.push((j, d));
                        }
                    }
                    (i, list)
                })
                .collect();
            (lists, dups)
        })
        .collect();

    let mut lists = vec![Vec::new(); n];
    let mut dropped = 0;
    for (cell_lists, dups) in per_cell {
        dropped += dups;
        for (i, list) in cell_lists {
            lists[i] = list;
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} zero-length edges between coincident points");
    }
    Ok(EpsilonGraph {
        graph: WeightedGraph::from_sorted_lists(lists),
        dropped_duplicates: dropped,
    })
}

/// Coordinates of every point on the grid axes (row-major, `g` per point).
/// Axes along which the cloud spans less than `epsilon` are dropped: they would
/// only add empty neighbor probes.
fn grid_projection(cloud: &PointCloud, epsilon: f64) -> Vec<f64> {
    let n = cloud.len();
    let d = cloud.dim();
    let axes: Vec<Vec<f64>> = if d <= MAX_GRID_AXES {
        (0..d)
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                e
            })
            .collect()
    } else {
        principal_axes(cloud, MAX_GRID_AXES)
    };
    let projected: Vec<Vec<f64>> = axes
        .iter()
        .map(|a| cloud.points().map(|p| p.iter().zip(a).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let kept: Vec<&Vec<f64>> = projected
        .iter()
        .filter(|col| {
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            hi - lo >= epsilon
        })
        .collect();
    let g = kept.len();
    let mut out = vec![0.0; n * g];
    for (k, col) in kept.iter().enumerate() {
        for i in 0..n {
            out[i * g + k] = col[i];
        }
    }
    out
}

/// Leading `count` eigenvectors of the sample covariance.
fn principal_axes(cloud: &PointCloud, count: usize) -> Vec<Vec<f64>> {
    let n = cloud.len();
    let d = cloud.dim();
    let mut mean = vec![0.0; d];
    for p in cloud.points() {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for p in cloud.points() {
        for k in 0..d {
            centered[k] = p[k] - mean[k];
        }
        for a in 0..d {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..d {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(count)
        .map(|k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect()
}

fn neighbor_offsets(g: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..g {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-1..=1).map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o);
                    p
                })
            })
            .collect();
    }
    out
}

/// Single-source shortest-path distances; unreachable vertices are `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub source: usize,
    pub dist: Vec<f64>,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then on vertex id
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn dijkstra(graph: &WeightedGraph, source: usize) -> Result<DistanceRow> {
    if source >= graph.n() {
        return Err(Error::invalid(format!(
            "source {source} out of range for {} vertices",
            graph.n()
        )));
    }
    let mut dist = vec![f64::INFINITY; graph.n()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        vertex: source,
    });
    while let Some(HeapEntry { dist: d, vertex: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for (v, w) in graph.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapEntry { dist: nd, vertex: v });
            }
        }
    }
    Ok(DistanceRow { source, dist })
}

/// Dijkstra from several sources, in parallel; rows are in `sources` order.
pub fn dijkstra_many(graph: &WeightedGraph, sources: &[usize]) -> Result<Vec<DistanceRow>> {
    sources.par_iter().map(|&s| dijkstra(graph, s)).collect()
}

/// Component label per vertex, numbered by smallest contained vertex.
pub fn connected_components(graph: &WeightedGraph) -> Vec<usize> {
    let n = graph.n();
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for (v, _) in graph.neighbors(u) {
                if labels[v] == usize::MAX {
                    labels[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    labels
}

pub fn component_count(labels: &[usize]) -> usize {
    labels.iter().copied().max().map_or(0, |m| m + 1)
}

pub fn is_connected(graph: &WeightedGraph) -> bool {
    component_count(&connected_components(graph)) <= 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cloud: &PointCloud, eps: f64) -> WeightedGraph {
        let n = cloud.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let d = euclidean(cloud.point(i), cloud.point(j));
                if d > 0.0 && d <= eps {
                    edges.push((i, j, d));
                }
            }
        }
        WeightedGraph::from_edges(n, edges).unwrap()
    }

    fn random_cloud(n: usize, d: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        PointCloud::new(&pts).unwrap()
    }

    fn floyd_warshall(g: &WeightedGraph) -> Vec<Vec<f64>> {
        let n = g.n();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for i in 0..n {
            d[i][i] = 0.0;
            for (j, w) in g.neighbors(i) {
                d[i][j] = d[i][j].min(w);
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

    #[test]
    fn square_corners_have_no_diagonals() {
        let cloud = PointCloud::new(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let g = build_epsilon_graph(&cloud, 1.1).unwrap().graph;
        assert_eq!(g.edge_count(), 4);
        assert!(g.edges().all(|(_, _, w)| w == 1.0));
        assert_eq!(g.weight(0, 3), None);
    }

    #[test]
    fn collinear_points_beyond_epsilon() {
        let cloud = PointCloud::new(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(build_epsilon_graph(&cloud, 0.5).unwrap().graph.edge_count(), 0);
    }

    #[test]
    fn matches_brute_force_on_random_square() {
        let cloud = random_cloud(20, 2, 7);
        assert_eq!(build_epsilon_graph(&cloud, 0.3).unwrap().graph, brute_force(&cloud, 0.3));
    }

    #[test]
    fn matches_brute_force_in_high_dimension() {
        // d > 8 exercises the principal-axis grid
        let cloud = random_cloud(400, 12, 3);
        let eps = 0.9;
        let fast = build_epsilon_graph(&cloud, eps).unwrap().graph;
        assert!(fast.edge_count() > 0);
        assert_eq!(fast, brute_force(&cloud, eps));
    }

    #[test]
    fn duplicates_are_dropped_and_counted() {
        let cloud = PointCloud::new(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.5, 0.0]]).unwrap();
        let eg = build_epsilon_graph(&cloud, 1.0).unwrap();
        assert_eq!(eg.dropped_duplicates, 1);
        assert_eq!(eg.graph.edge_count(), 2);
        assert_eq!(eg.graph.weight(0, 1), None);
    }

    #[test]
    fn nonpositive_epsilon_is_rejected() {
        let cloud = random_cloud(3, 2, 0);
        assert!(matches!(build_epsilon_graph(&cloud, 0.0), Err(Error::InvalidArgument(_))));
        assert!(build_epsilon_graph(&cloud, -1.0).is_err());
    }

    #[test]
    fn dijkstra_path_and_unreachable() {
        let path = WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(dijkstra(&path, 0).unwrap().dist, vec![0.0, 1.0, 2.0]);
        let split = WeightedGraph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let row = dijkstra(&split, 0).unwrap();
        assert!(row.dist[2].is_infinite() && row.dist[3].is_infinite());
        assert!(dijkstra(&split, 4).is_err());
    }

    #[test]
    fn dijkstra_matches_floyd_warshall() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|v| (rng.random_range(0..v), v, rng.random::<f64>() + 0.01)).collect();
        for _ in 0..80 {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u != v && !edges.iter().any(|&(a, b, _)| (a, b) == (u, v) || (a, b) == (v, u)) {
                edges.push((u, v, rng.random::<f64>() * 2.0));
            }
        }
        let g = WeightedGraph::from_edges(n, edges).unwrap();
        let fw = floyd_warshall(&g);
        let rows = dijkstra_many(&g, &(0..n).collect::<Vec<_>>()).unwrap();
        for (s, row) in rows.iter().enumerate() {
            for v in 0..n {
                assert!((row.dist[v] - fw[s][v]).abs() <= 1e-12 * fw[s][v].max(1.0));
            }
        }
    }

    #[test]
    fn components_examples() {
        let single = WeightedGraph::from_edges(1, []).unwrap();
        assert_eq!(connected_components(&single), vec![0]);
        let tri = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)];
        let g = WeightedGraph::from_edges(6, tri).unwrap();
        assert_eq!(connected_components(&g), vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn component_count_matches_bfs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 60;
        let mut edges = Vec::new();
        for _ in 0..40 {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u != v {
                edges.push((u.min(v), u.max(v), 1.0));
            }
        }
        edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        edges.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
        let g = WeightedGraph::from_edges(n, edges.clone()).unwrap();
        // union-find oracle
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for &(u, v, _) in &edges {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            parent[a.max(b)] = a.min(b);
        }
        let roots: std::collections::BTreeSet<usize> = (0..n).map(|v| find(&mut parent, v)).collect();
        assert_eq!(component_count(&connected_components(&g)), roots.len());
    }

    #[test]
    fn rejects_malformed_edges() {
        assert!(WeightedGraph::from_edges(2, [(0, 0, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 1, -1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 2, 1.0)]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn epsilon_graph_equals_brute_force(seed in 0u64..1000, n in 1usize..120, d in 1usize..4, eps in 0.05f64..0.6) {
            let cloud = random_cloud(n, d, seed);
            let g = build_epsilon_graph(&cloud, eps).unwrap().graph;
            proptest::prop_assert_eq!(&g, &brute_force(&cloud, eps));
            for (u, v, w) in g.edges() {
                proptest::prop_assert_eq!(g.weight(v, u), Some(w));
            }
        }

        #[test]
        fn dijkstra_relaxation_holds(seed in 0u64..1000) {
            let cloud = random_cloud(80, 2, seed);
            let g = build_epsilon_graph(&cloud, 0.25).unwrap().graph;
            let row = dijkstra(&g, (seed as usize) % 80).unwrap();
            for (u, v, w) in g.edges() {
                proptest::prop_assert!(row.dist[v] <= row.dist[u] + w);
                proptest::prop_assert!(row.dist[u] <= row.dist[v] + w);
            }
        }
    }
}
