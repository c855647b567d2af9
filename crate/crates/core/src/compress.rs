//! Sparsification of samplet coefficients by adaptive tree coarsening (AT) and
//! by best-k-term norm thresholding (NT), plus reconstruction and reporting.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplets::{SampletForest, SampletTree};

/// Subtree energies `e` and modified energies `e~` of one patch, indexed by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTree {
    /// Squared norm of the coefficients attached to each node.
    pub attached: Vec<f64>,
    pub energy: Vec<f64>,
    pub modified: Vec<f64>,
}

fn patch_energies(tree: &SampletTree, coeffs: &[f64]) -> EnergyTree {
    let nodes = tree.tree().nodes();
    let attached: Vec<f64> = (0..nodes.len())
        .map(|id| tree.node_positions(id).iter().map(|&k| coeffs[k] * coeffs[k]).sum())
        .collect();
    let mut energy = attached.clone();
    for id in (0..nodes.len()).rev() {
        let below: f64 = nodes[id].children.iter().map(|&c| energy[c]).sum();
        energy[id] += below;
    }
    let mut modified = vec![0.0; nodes.len()];
    modified[0] = energy[0];
    for (id, node) in nodes.iter().enumerate() {
        let denom = energy[id] + modified[id];
        let below: f64 = node.children.iter().map(|&c| energy[c]).sum();
        let value = if denom > 0.0 { below / denom * modified[id] } else { 0.0 };
        for &c in &node.children {
            modified[c] = value;
        }
    }
    EnergyTree {
        attached,
        energy,
        modified,
    }
}

/// Energies of every patch for coefficients in forest layout.
pub fn node_energies(forest: &SampletForest, coeffs: &[f64]) -> Result<Vec<EnergyTree>> {
    check_len(forest, coeffs)?;
    Ok(forest
        .trees()
        .par_iter()
        .enumerate()
        .map(|(r, tree)| patch_energies(tree, &coeffs[forest.patch_range(r)]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "AT")]
    AdaptiveTree,
    #[serde(rename = "NT")]
    NormThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoefficients {
    pub strategy: Strategy,
    /// Nonzero `(global position, value)` pairs, ascending by position.
    pub kept: Vec<(usize, f64)>,
    pub total_norm_sq: f64,
}

impl SparseCoefficients {
    pub fn nnz(&self) -> usize {
        self.kept.len()
    }

    pub fn kept_norm_sq(&self) -> f64 {
        self.kept.iter().map(|(_, v)| v * v).sum()
    }

    pub fn densify(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(k, v) in &self.kept {
            out[k] = v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveTreeResult {
    pub sparse: SparseCoefficients,
    /// Kept node ids per patch, ascending.
    pub kept_nodes: Vec<Vec<usize>>,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("compression epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

fn check_len(forest: &SampletForest, coeffs: &[f64]) -> Result<()> {
    if coeffs.len() != forest.len() {
        return Err(Error::invalid(format!(
            "coefficient vector has length {} but the forest has {} coefficients",
            coeffs.len(),
            forest.len()
        )));
    }
    Ok(())
}

fn coarsen_patch(tree: &SampletTree, e: &EnergyTree, epsilon: f64) -> Vec<usize> {
    let nodes = tree.tree().nodes();
    let total = e.energy[0];
    let threshold = epsilon * epsilon * total;
    let mut kept = vec![false; nodes.len()];
    kept[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let children = &nodes[id].children;
        if children.iter().any(|&c| e.modified[c] > threshold) {
            for &c in children {
                kept[c] = true;
                queue.push_back(c);
            }
        }
    }
    let target = (1.0 - epsilon * epsilon) * total;
    let mut retained: f64 = (0..nodes.len()).filter(|&id| kept[id]).map(|id| e.attached[id]).sum();
    while retained < target {
        let frontier = (0..nodes.len())
            .filter(|&id| kept[id] && !nodes[id].is_leaf() && !kept[nodes[id].children[0]])
            .map(|id| (id, e.energy[id] - e.attached[id]))
            .fold(None, |best: Option<(usize, f64)>, cand| match best {
                Some(b) if b.1 >= cand.1 => Some(b),
                _ => Some(cand),
            });
        let Some((id, _)) = frontier else { break };
        for &c in &nodes[id].children {
            kept[c] = true;
            retained += e.attached[c];
        }
    }
    (0..nodes.len()).filter(|&id| kept[id]).collect()
}

/// Adaptive tree coarsening with modified energies, threshold
/// `epsilon^2 |f_r|^2` per patch, followed by greedy expansion of the frontier
/// until every patch retains `(1 - epsilon^2) |f_r|^2`.
pub fn adaptive_tree_coarsen(forest: &SampletForest, coeffs: &[f64], epsilon: f64) -> Result<AdaptiveTreeResult> {
    check_epsilon(epsilon)?;
    let energies = node_energies(forest, coeffs)?;
    let per_patch: Vec<(Vec<usize>, Vec<(usize, f64)>)> = forest
        .trees()
        .par_iter()
        .zip(&energies)
        .enumerate()
        .map(|(r, (tree, e))| {
            let nodes = coarsen_patch(tree, e, epsilon);
            let base = forest.patch_range(r).start;
            let mut kept: Vec<(usize, f64)> = nodes
                .iter()
                .flat_map(|&id| tree.node_positions(id))
                .map(|k| (base + k, coeffs[base + k]))
                .filter(|&(_, v)| v != 0.0)
                .collect();
            kept.sort_by_key(|&(k, _)| k);
            (nodes, kept)
        })
        .collect();
    let mut kept_nodes = Vec::with_capacity(per_patch.len());
    let mut kept = Vec::new();
    for (nodes, k) in per_patch {
        kept_nodes.push(nodes);
        kept.extend(k);
    }
    Ok(AdaptiveTreeResult {
        sparse: SparseCoefficients {
            strategy: Strategy::AdaptiveTree,
            kept,
            total_norm_sq: energies.iter().map(|e| e.energy[0]).sum(),
        },
        kept_nodes,
    })
}

/// Best-k-term selection: the fewest largest-modulus coefficients whose
/// squared norm reaches `(1 - epsilon^2) |c|^2`. Ties in modulus go to the
/// lower position.
pub fn norm_threshold(coeffs: &[f64], epsilon: f64) -> Result<SparseCoefficients> {
    check_epsilon(epsilon)?;
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    order.sort_by(|&a, &b| coeffs[b].abs().total_cmp(&coeffs[a].abs()).then(a.cmp(&b)));
    let mut suffix = vec![0.0; order.len() + 1];
    for i in (0..order.len()).rev() {
        suffix[i] = suffix[i + 1] + coeffs[order[i]] * coeffs[order[i]];
    }
    let total = suffix[0];
    let allowed = epsilon * epsilon * total;
    let k = (0..=order.len()).find(|&k| suffix[k] <= allowed).unwrap_or(order.len());
    let mut kept: Vec<(usize, f64)> = order[..k].iter().map(|&i| (i, coeffs[i])).collect();
    kept.sort_by_key(|&(i, _)| i);
    Ok(SparseCoefficients {
        strategy: Strategy::NormThreshold,
        kept,
        total_norm_sq: total,
    })
}

/// Inverse transform of the kept coefficients.
pub fn reconstruct(forest: &SampletForest, sparse: &SparseCoefficients) -> Result<Vec<f64>> {
    if let Some(&(k, _)) = sparse.kept.iter().find(|&&(k, _)| k >= forest.len()) {
        return Err(Error::invalid(format!("kept position {k} is outside the forest layout")));
    }
    forest.inverse(&sparse.densify(forest.len()))
}

/// `|f - g|_2 / |f|_2`, or `|f - g|_2` when `f` vanishes.
pub fn relative_error(original: &[f64], reconstruction: &[f64]) -> f64 {
    let diff = original
        .iter()
        .zip(reconstruction)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = original.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchCompression {
    pub patch: usize,
    pub n: usize,
    pub nnz_at: usize,
    pub nnz_nt: usize,
}

/// Both strategies applied to one coefficient vector, with reconstruction errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionOutcome {
    pub at: AdaptiveTreeResult,
    pub nt: SparseCoefficients,
    pub rel_err_at: f64,
    pub rel_err_nt: f64,
    pub per_patch: Vec<PatchCompression>,
}

pub fn compress(forest: &SampletForest, signal: &[f64], coeffs: &[f64], epsilon: f64) -> Result<CompressionOutcome> {
    let at = adaptive_tree_coarsen(forest, coeffs, epsilon)?;
    let nt = norm_threshold(coeffs, epsilon)?;
    let rel_err_at = relative_error(signal, &reconstruct(forest, &at.sparse)?);
    let rel_err_nt = relative_error(signal, &reconstruct(forest, &nt)?);
    let per_patch = (0..forest.trees().len())
        .map(|r| {
            let range = forest.patch_range(r);
            let count = |s: &SparseCoefficients| s.kept.iter().filter(|(k, _)| range.contains(k)).count();
            PatchCompression {
                patch: r,
                n: range.len(),
                nnz_at: count(&at.sparse),
                nnz_nt: count(&nt),
            }
        })
        .collect();
    Ok(CompressionOutcome {
        at,
        nt,
        rel_err_at,
        rel_err_nt,
        per_patch,
    })
}

/// One row of the compression report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub q: usize,
    pub p: usize,
    pub landmarks: usize,
    pub s_plus_1: usize,
    pub epsilon: f64,
    pub lost_energy: f64,
    pub nnz_at: usize,
    pub nnz_nt: usize,
    pub rel_err_at: f64,
    pub rel_err_nt: f64,
    pub wall_ms_transform: Option<f64>,
}

#[derive(Serialize)]
struct CsvRow {
    lost_energy: f64,
    s_plus_1: usize,
    nnz_at: usize,
    nnz_nt: usize,
    rel_err_at: f64,
    rel_err_nt: f64,
}

pub fn write_report_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            lost_energy: r.lost_energy,
            s_plus_1: r.s_plus_1,
            nnz_at: r.nnz_at,
            nnz_nt: r.nnz_nt,
            rel_err_at: r.rel_err_at,
            rel_err_nt: r.rel_err_nt,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
