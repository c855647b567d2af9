//! Multilevel k-way partitioning into connected patches.
//!
//! Edge weights are distances, so the partitioner works on affinities `1/w`:
//! heavy-edge matching then contracts short edges first. Pipeline: coarsen by
//! heavy-edge matching, grow a balanced k-way partition on the coarsest graph
//! from MaxMin-spread seeds, project back level by level with greedy boundary
//! refinement, and finally repair disconnected patches.

use std::collections::{BTreeMap, BinaryHeap};

use crate::error::{Error, Result};
use crate::graph::{self, WeightedGraph};

/// Allowed relative excess of a patch over `ceil(n / p)` vertices.
pub const BALANCE_SLACK: f64 = 0.25;
const MAX_REFINE_SWEEPS: usize = 10;
/// Coarsening stops once a level shrinks by less than this factor.
const MIN_COARSEN_SHRINK: f64 = 0.95;

/// Largest admissible patch size for `n` vertices in `p` patches.
pub fn balance_cap(n: usize, p: usize) -> usize {
    (((1.0 + BALANCE_SLACK) * n.div_ceil(p) as f64).floor() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// Global ids of the patch vertices, ascending; position = local id.
    pub vertices: Vec<usize>,
    /// Induced subgraph in local ids.
    pub graph: WeightedGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    labels: Vec<usize>,
    patches: Vec<Patch>,
    warnings: Vec<String>,
}

impl Partition {
    /// Builds patches from labels in `0..p`; every patch must be nonempty.
    pub fn from_labels(graph: &WeightedGraph, labels: Vec<usize>, p: usize) -> Result<Self> {
        if labels.len() != graph.n() {
            return Err(Error::invalid(format!(
                "{} labels for a graph with {} vertices",
                labels.len(),
                graph.n()
            )));
        }
        let mut members = vec![Vec::new(); p];
        for (v, &l) in labels.iter().enumerate() {
            if l >= p {
                return Err(Error::invalid(format!("vertex {v} has patch id {l} >= {p}")));
            }
            members[l].push(v);
        }
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("patch {empty} is empty")));
        }
        let patches = members
            .into_iter()
            .map(|vertices| Patch {
                graph: graph.induced_subgraph(&vertices),
                vertices,
            })
            .collect();
        Ok(Self {
            labels,
            patches,
            warnings: Vec::new(),
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn p(&self) -> usize {
        self.patches.len()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Warnings raised while partitioning, e.g. balance given up for connectivity.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn max_patch_size(&self) -> usize {
        self.patches.iter().map(|p| p.vertices.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PartitionQuality {
    /// Sum of `1/w` over edges between different patches.
    pub cut_affinity: f64,
    /// `max patch size * p / n`.
    pub imbalance: f64,
    pub connected: bool,
}

pub fn partition_quality(partition: &Partition, graph: &WeightedGraph) -> PartitionQuality {
    let labels = partition.labels();
    let cut_affinity = graph
        .edges()
        .filter(|&(u, v, _)| labels[u] != labels[v])
        .map(|(_, _, w)| 1.0 / w)
        .sum();
    let imbalance = partition.max_patch_size() as f64 * partition.p() as f64 / partition.n() as f64;
    let connected = partition.patches().iter().all(|p| graph::is_connected(&p.graph));
    PartitionQuality {
        cut_affinity,
        imbalance,
        connected,
    }
}

/// Working graph of one coarsening level: vertex weights and summed affinities.
#[derive(Debug, Clone)]
struct Level {
    vwgt: Vec<usize>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl Level {
    fn from_graph(graph: &WeightedGraph) -> Result<Self> {
        let mut adj = Vec::with_capacity(graph.n());
        for u in 0..graph.n() {
            let mut list = Vec::with_capacity(graph.degree(u));
            for (v, w) in graph.neighbors(u) {
                if w <= 0.0 {
                    return Err(Error::invalid(format!(
                        "edge ({u}, {v}) has zero length; affinities need positive weights"
                    )));
                }
                list.push((v, 1.0 / w));
            }
            adj.push(list);
        }
        Ok(Self {
            vwgt: vec![1; graph.n()],
            adj,
        })
    }

    fn n(&self) -> usize {
        self.vwgt.len()
    }

    /// Heavy-edge matching in vertex order; returns the coarse level and the
    /// fine-to-coarse map, or `None` when no edge could be matched.
    fn coarsen(&self, max_vwgt: usize) -> Option<(Level, Vec<usize>)> {
        let n = self.n();
        let mut mate = vec![usize::MAX; n];
        let mut matched_pairs = 0;
        for u in 0..n {
            if mate[u] != usize::MAX {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for &(v, a) in &self.adj[u] {
                if mate[v] != usize::MAX || self.vwgt[u] + self.vwgt[v] > max_vwgt {
                    continue;
                }
                // neighbors are sorted by id, so strict comparison keeps the smaller id
                if best.is_none_or(|(_, ba)| a > ba) {
                    best = Some((v, a));
                }
            }
            match best {
                Some((v, _)) => {
                    mate[u] = v;
                    mate[v] = u;
                    matched_pairs += 1;
                }
                None => mate[u] = u,
            }
        }
        if matched_pairs == 0 {
            return None;
        }
        let mut cmap = vec![usize::MAX; n];
        let mut groups = Vec::new();
        for u in 0..n {
            if cmap[u] == usize::MAX {
                cmap[u] = groups.len();
                cmap[mate[u]] = groups.len();
                groups.push(if mate[u] == u { vec![u] } else { vec![u, mate[u]] });
            }
        }
        let mut vwgt = Vec::with_capacity(groups.len());
        let mut adj = Vec::with_capacity(groups.len());
        for (c, members) in groups.iter().enumerate() {
            vwgt.push(members.iter().map(|&u| self.vwgt[u]).sum());
            let mut list: Vec<(usize, f64)> = members
                .iter()
                .flat_map(|&u| self.adj[u].iter().map(|&(v, a)| (cmap[v], a)))
                .filter(|&(cv, _)| cv != c)
                .collect();
            list.sort_by_key(|&(cv, _)| cv);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(list.len());
            for (cv, a) in list {
                match merged.last_mut() {
                    Some((pv, pa)) if *pv == cv => *pa += a,
                    _ => merged.push((cv, a)),
                }
            }
            adj.push(merged);
        }
        Some((Level { vwgt, adj }, cmap))
    }

    /// Shortest-path distances with edge length `1/affinity`.
    fn affinity_distances(&self, source: usize) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Entry(f64, usize);
        impl Eq for Entry {}
        impl Ord for Entry {
            fn cmp(&self, o: &Self) -> std::cmp::Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Entry {
            fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(o))
            }
        }
        let mut dist = vec![f64::INFINITY; self.n()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry(0.0, source));
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, a) in &self.adj[u] {
                let nd = d + 1.0 / a;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        dist
    }
}

fn argmax_smallest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate() {
        if x > values[best] {
            best = i;
        }
    }
    best
}

/// MaxMin seeds: the first is farthest from `start`, each next one maximizes
/// its distance to the seeds chosen so far.
fn maxmin_seeds(level: &Level, p: usize, start: usize) -> Vec<usize> {
    let from_start = level.affinity_distances(start);
    let first = argmax_smallest(&from_start);
    let mut seeds = vec![first];
    let mut mind = level.affinity_distances(first);
    while seeds.len() < p {
        for &s in &seeds {
            mind[s] = f64::NEG_INFINITY;
        }
        let next = argmax_smallest(&mind);
        seeds.push(next);
        let d = level.affinity_distances(next);
        for (m, x) in mind.iter_mut().zip(d) {
            *m = m.min(x);
        }
    }
    seeds
}

/// Greedy simultaneous region growing: the lightest part with an admissible
/// frontier vertex absorbs its most strongly connected one.
fn grow_initial(level: &Level, p: usize, cap: usize, seed: u64) -> Vec<usize> {
    let n = level.n();
    let seeds = maxmin_seeds(level, p, (seed % n as u64) as usize);
    let mut labels = vec![usize::MAX; n];
    let mut weight = vec![0usize; p];
    let mut frontier: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); p];
    let assign = |v: usize, part: usize, labels: &mut Vec<usize>, weight: &mut Vec<usize>, frontier: &mut Vec<BTreeMap<usize, f64>>| {
        labels[v] = part;
        weight[part] += level.vwgt[v];
        for f in frontier.iter_mut() {
            f.remove(&v);
        }
        for &(u, a) in &level.adj[v] {
            if labels[u] == usize::MAX {
                *frontier[part].entry(u).or_insert(0.0) += a;
            }
        }
    };
    for (part, &s) in seeds.iter().enumerate() {
        assign(s, part, &mut labels, &mut weight, &mut frontier);
    }
    let mut remaining = n - p;
    while remaining > 0 {
        let pick = |respect_cap: bool| -> Option<(usize, usize)> {
            let mut best: Option<(usize, usize)> = None;
            for part in 0..p {
                if best.is_some_and(|(bp, _)| weight[part] >= weight[bp]) {
                    continue;
                }
                let mut cand: Option<(usize, f64)> = None;
                for (&v, &a) in &frontier[part] {
                    if respect_cap && weight[part] + level.vwgt[v] > cap {
                        continue;
                    }
                    if cand.is_none_or(|(_, ca)| a > ca) {
                        cand = Some((v, a));
                    }
                }
                if let Some((v, _)) = cand {
                    best = Some((part, v));
                }
            }
            best
        };
        match pick(true).or_else(|| pick(false)) {
            Some((part, v)) => {
                assign(v, part, &mut labels, &mut weight, &mut frontier);
                remaining -= 1;
            }
            None => unreachable!("connected graph always has a frontier"),
        }
    }
    labels
}

fn part_connections(level: &Level, labels: &[usize], v: usize) -> BTreeMap<usize, f64> {
    let mut conn = BTreeMap::new();
    for &(u, a) in &level.adj[v] {
        *conn.entry(labels[u]).or_insert(0.0) += a;
    }
    conn
}

/// Moves boundary vertices out of overweight parts, then runs greedy
/// cut-reducing sweeps under the balance cap.
fn refine(level: &Level, labels: &mut [usize], p: usize, cap: usize) {
    let n = level.n();
    let mut weight = vec![0usize; p];
    for v in 0..n {
        weight[labels[v]] += level.vwgt[v];
    }

    let mut progress = true;
    while progress && weight.iter().any(|&w| w > cap) {
        progress = false;
        for v in 0..n {
            let own = labels[v];
            if weight[own] <= cap || weight[own] == level.vwgt[v] {
                continue;
            }
            let conn = part_connections(level, labels, v);
            let own_conn = conn.get(&own).copied().unwrap_or(0.0);
            let best = conn
                .iter()
                .filter(|&(&t, _)| t != own && weight[t] + level.vwgt[v] <= cap)
                .fold(None, |best: Option<(usize, f64)>, (&t, &a)| match best {
                    Some((_, ba)) if ba >= a - own_conn => best,
                    _ => Some((t, a - own_conn)),
                });
            if let Some((t, _)) = best {
                labels[v] = t;
                weight[own] -= level.vwgt[v];
                weight[t] += level.vwgt[v];
                progress = true;
            }
        }
    }

    for _ in 0..MAX_REFINE_SWEEPS {
        let mut moved = false;
        for v in 0..n {
            let own = labels[v];
            if weight[own] == level.vwgt[v] {
                continue;
            }
            let conn = part_connections(level, labels, v);
            let own_conn = conn.get(&own).copied().unwrap_or(0.0);
            let mut best: Option<(usize, f64)> = None;
            for (&t, &a) in &conn {
                if t == own || weight[t] + level.vwgt[v] > cap {
                    continue;
                }
                let gain = a - own_conn;
                if gain > 0.0 && best.is_none_or(|(_, bg)| gain > bg) {
                    best = Some((t, gain));
                }
            }
            if let Some((t, _)) = best {
                labels[v] = t;
                weight[own] -= level.vwgt[v];
                weight[t] += level.vwgt[v];
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Relabels every fragment of a disconnected patch (all but its largest
/// component) to the adjacent patch with the largest affinity towards it,
/// preferring patches that stay within `cap`. Each move strictly lowers the
/// total number of patch components, so the loop terminates.
pub fn repair_connectivity(graph: &WeightedGraph, labels: &mut [usize], p: usize, cap: usize) -> Vec<String> {
    let n = graph.n();
    let mut warnings = Vec::new();
    let mut size = vec![0usize; p];
    for &l in labels.iter() {
        size[l] += 1;
    }
    loop {
        let mut changed = false;
        for part in 0..p {
            let members: Vec<usize> = (0..n).filter(|&v| labels[v] == part).collect();
            let sub = graph.induced_subgraph(&members);
            let comp = graph::connected_components(&sub);
            let count = graph::component_count(&comp);
            if count <= 1 {
                continue;
            }
            let mut comp_size = vec![0usize; count];
            for &c in &comp {
                comp_size[c] += 1;
            }
            // components are numbered by smallest vertex, so ties keep the lower one
            let keep = (0..count).fold(0, |b, c| if comp_size[c] > comp_size[b] { c } else { b });
            for frag in (0..count).filter(|&c| c != keep) {
                let fverts: Vec<usize> = members
                    .iter()
                    .zip(&comp)
                    .filter(|&(_, &c)| c == frag)
                    .map(|(&v, _)| v)
                    .collect();
                let mut toward: BTreeMap<usize, f64> = BTreeMap::new();
                for &v in &fverts {
                    for (u, w) in graph.neighbors(v) {
                        if labels[u] != part {
                            *toward.entry(labels[u]).or_insert(0.0) += 1.0 / w;
                        }
                    }
                }
                let best_of = |fits: bool| {
                    toward
                        .iter()
                        .filter(|&(&t, _)| !fits || size[t] + fverts.len() <= cap)
                        .fold(None, |b: Option<(usize, f64)>, (&t, &a)| match b {
                            Some((_, ba)) if ba >= a => b,
                            _ => Some((t, a)),
                        })
                };
                let target = match best_of(true) {
                    Some((t, _)) => t,
                    None => {
                        let (t, _) = best_of(false).expect("fragment of a connected graph has a neighbor patch");
                        warnings.push(format!(
                            "connectivity repair moved {} vertices into patch {t}, exceeding the balance cap {cap}",
                            fverts.len()
                        ));
                        t
                    }
                };
                for &v in &fverts {
                    labels[v] = target;
                }
                size[part] -= fverts.len();
                size[target] += fverts.len();
                changed = true;
            }
            if changed {
                break;
            }
        }
        if !changed {
            return warnings;
        }
    }
}

/// Renumbers patches by their smallest vertex.
fn canonical_labels(labels: &mut [usize], p: usize) {
    let mut map = vec![usize::MAX; p];
    let mut next = 0;
    for l in labels.iter_mut() {
        if map[*l] == usize::MAX {
            map[*l] = next;
            next += 1;
        }
        *l = map[*l];
    }
}

/// Splits a connected graph into `p` connected patches.
pub fn partition_graph(graph: &WeightedGraph, p: usize, seed: u64) -> Result<Partition> {
    let n = graph.n();
    if p == 0 || p > n {
        return Err(Error::invalid(format!("patch count {p} must lie in 1..={n}")));
    }
    let components = graph::component_count(&graph::connected_components(graph));
    if components > 1 {
        return Err(Error::Disconnected { components });
    }
    if p == 1 {
        return Partition::from_labels(graph, vec![0; n], 1);
    }
    let cap = balance_cap(n, p);
    let coarsen_to = (30 * p).max(2 * p);
    let max_vwgt = ((1.5 * n as f64 / coarsen_to as f64).ceil() as usize).max(1);

    let mut levels = vec![Level::from_graph(graph)?];
    let mut maps: Vec<Vec<usize>> = Vec::new();
    while levels.last().map_or(0, Level::n) > coarsen_to {
        let fine = levels.last().expect("nonempty");
        match fine.coarsen(max_vwgt) {
            Some((coarse, cmap)) => {
                let shrunk = (coarse.n() as f64) > MIN_COARSEN_SHRINK * fine.n() as f64;
                levels.push(coarse);
                maps.push(cmap);
                if shrunk {
                    break;
                }
            }
            None => break,
        }
    }

    let coarsest = levels.last().expect("nonempty");
    let mut labels = grow_initial(coarsest, p, cap, seed);
    refine(coarsest, &mut labels, p, cap);
    for k in (0..maps.len()).rev() {
        let cmap = &maps[k];
        labels = cmap.iter().map(|&c| labels[c]).collect();
        refine(&levels[k], &mut labels, p, cap);
    }

    let mut warnings = repair_connectivity(graph, &mut labels, p, cap);
    canonical_labels(&mut labels, p);
    let mut partition = Partition::from_labels(graph, labels, p)?;
    if partition.max_patch_size() > cap {
        warnings.push(format!(
            "largest patch has {} vertices, above the balance cap {cap}",
            partition.max_patch_size()
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    partition.warnings = warnings;
    Ok(partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_epsilon_graph, PointCloud};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path(n: usize) -> WeightedGraph {
        WeightedGraph::from_edges(n, (0..n - 1).map(|i| (i, i + 1, 1.0))).unwrap()
    }

    fn two_triangles() -> WeightedGraph {
        let e = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 10.0)];
        WeightedGraph::from_edges(6, e).unwrap()
    }

    fn geometric(n: usize, seed: u64) -> WeightedGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        build_epsilon_graph(&PointCloud::new(&pts).unwrap(), 0.12).unwrap().graph
    }

    /// Minimum cut over all 2-partitions with sizes `n/2, n/2`.
    fn exhaustive_bisection(g: &WeightedGraph) -> (f64, Vec<Vec<usize>>) {
        let n = g.n();
        let mut best = f64::INFINITY;
        let mut arg = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n / 2 || mask & 1 == 0 {
                continue;
            }
            let labels: Vec<usize> = (0..n).map(|v| ((mask >> v) & 1 == 0) as usize).collect();
            let cut: f64 = g.edges().filter(|&(u, v, _)| labels[u] != labels[v]).map(|(_, _, w)| 1.0 / w).sum();
            if cut < best - 1e-12 {
                best = cut;
                arg = vec![labels];
            } else if (cut - best).abs() <= 1e-12 {
                arg.push(labels);
            }
        }
        (best, arg)
    }

    #[test]
    fn single_patch() {
        let g = geometric(400, 1);
        let part = partition_graph(&g, 1, 0).unwrap();
        assert!(part.labels().iter().all(|&l| l == 0));
        let q = partition_quality(&part, &g);
        assert_eq!(q.cut_affinity, 0.0);
        assert_eq!(q.imbalance, 1.0);
        assert!(q.connected);
    }

    #[test]
    fn two_triangles_split_at_bridge() {
        let g = two_triangles();
        for seed in 0..6 {
            let part = partition_graph(&g, 2, seed).unwrap();
            assert_eq!(part.labels(), &[0, 0, 0, 1, 1, 1]);
            assert_eq!(partition_quality(&part, &g).cut_affinity, 0.1);
        }
    }

    #[test]
    fn path_of_ten_matches_exhaustive_oracle() {
        let g = path(10);
        let (best, optimal) = exhaustive_bisection(&g);
        assert_eq!(best, 1.0);
        assert_eq!(optimal.len(), 1);
        for seed in 0..10 {
            let part = partition_graph(&g, 2, seed).unwrap();
            assert_eq!(part.labels(), optimal[0].as_slice(), "seed {seed}");
        }
    }

    #[test]
    fn singletons_when_p_equals_n() {
        let g = geometric(30, 4);
        if !graph::is_connected(&g) {
            return;
        }
        let part = partition_graph(&g, 30, 2).unwrap();
        assert_eq!(part.max_patch_size(), 1);
        assert!(partition_quality(&part, &g).connected);
    }

    #[test]
    fn argument_errors() {
        let g = path(4);
        assert!(matches!(partition_graph(&g, 0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(partition_graph(&g, 5, 0), Err(Error::InvalidArgument(_))));
        let split = WeightedGraph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(partition_graph(&split, 2, 0), Err(Error::Disconnected { components: 2 })));
    }

    #[test]
    fn quality_matches_direct_summation() {
        let g = geometric(200, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut labels: Vec<usize> = (0..200).map(|_| rng.random_range(0..4)).collect();
        labels[..4].copy_from_slice(&[0, 1, 2, 3]);
        let part = Partition::from_labels(&g, labels.clone(), 4).unwrap();
        let mut cut = 0.0;
        for u in 0..200 {
            for (v, w) in g.neighbors(u) {
                if u < v && labels[u] != labels[v] {
                    cut += 1.0 / w;
                }
            }
        }
        let mut sizes = [0usize; 4];
        labels.iter().for_each(|&l| sizes[l] += 1);
        let q = partition_quality(&part, &g);
        assert!((q.cut_affinity - cut).abs() <= 1e-12 * cut);
        assert_eq!(q.imbalance, *sizes.iter().max().unwrap() as f64 * 4.0 / 200.0);
    }

    #[test]
    fn partitions_are_connected_balanced_and_deterministic() {
        for seed in 0..4u64 {
            let g = geometric(1500, 100 + seed);
            if !graph::is_connected(&g) {
                continue;
            }
            for p in [2, 5, 12] {
                let a = partition_graph(&g, p, seed).unwrap();
                let b = partition_graph(&g, p, seed).unwrap();
                assert_eq!(a.labels(), b.labels());
                let q = partition_quality(&a, &g);
                assert!(q.connected);
                assert!(a.max_patch_size() <= balance_cap(1500, p) || !a.warnings().is_empty());
            }
        }
    }

    #[test]
    fn repair_is_idempotent_on_valid_partition() {
        let g = geometric(800, 21);
        if !graph::is_connected(&g) {
            return;
        }
        let part = partition_graph(&g, 6, 1).unwrap();
        let mut labels = part.labels().to_vec();
        let warnings = repair_connectivity(&g, &mut labels, 6, balance_cap(800, 6));
        assert!(warnings.is_empty());
        assert_eq!(labels, part.labels());
    }

    #[test]
    fn repair_reconnects_fragments() {
        // path 0..8, patch 0 = {0,1,6,7}, patch 1 = {2,3,4,5}
        let g = path(8);
        let mut labels = vec![0, 0, 1, 1, 1, 1, 0, 0];
        repair_connectivity(&g, &mut labels, 2, 8);
        let part = Partition::from_labels(&g, labels, 2).unwrap();
        assert!(partition_quality(&part, &g).connected);
    }
}
