//! Landmark Isomap on a single connected patch.
//!
//! Geodesics are graph distances from a MaxMin-selected landmark set. The
//! landmark block is embedded by classical MDS of the double-centered squared
//! distances; every other vertex is placed by distance-based triangulation
//! against the landmarks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dijkstra, dijkstra_many, WeightedGraph};
use crate::linalg::symmetric_eigen_desc;

/// Number of leading eigenvalues kept in per-patch diagnostics.
pub const DIAGNOSTIC_EIGENVALUES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSet {
    pub ids: Vec<usize>,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Landmarks together with their geodesic rows (`rows[i][v]` = distance from
/// landmark `i` to vertex `v`).
#[derive(Debug, Clone)]
pub struct LandmarkGeodesics {
    pub landmarks: LandmarkSet,
    pub rows: Vec<Vec<f64>>,
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

fn ensure_finite(row: &[f64]) -> Result<()> {
    if row.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("patch is disconnected: geodesic distance is infinite"));
    }
    Ok(())
}

impl LandmarkGeodesics {
    /// MaxMin greedy selection starting from vertex `seed mod N_r`; the
    /// Dijkstra rows of the chosen landmarks are kept for the embedding.
    pub fn maxmin(patch: &WeightedGraph, n_landmarks: usize, seed: u64) -> Result<Self> {
        let n = patch.n();
        if n_landmarks == 0 || n_landmarks > n {
            return Err(Error::invalid(format!(
                "landmark count {n_landmarks} must lie in 1..={n}"
            )));
        }
        let start = (seed % n as u64) as usize;
        let from_start = dijkstra(patch, start)?.dist;
        ensure_finite(&from_start)?;
        let first = argmax_smallest(&from_start);
        let mut ids = vec![first];
        let mut rows = vec![dijkstra(patch, first)?.dist];
        let mut mind = rows[0].clone();
        while ids.len() < n_landmarks {
            for &l in &ids {
                mind[l] = f64::NEG_INFINITY;
            }
            let next = argmax_smallest(&mind);
            let row = dijkstra(patch, next)?.dist;
            for (m, &d) in mind.iter_mut().zip(&row) {
                *m = m.min(d);
            }
            ids.push(next);
            rows.push(row);
        }
        Ok(Self {
            landmarks: LandmarkSet { ids },
            rows,
        })
    }

    /// Geodesic rows for a given landmark set, computed in parallel.
    pub fn for_landmarks(patch: &WeightedGraph, landmarks: &LandmarkSet) -> Result<Self> {
        if landmarks.is_empty() {
            return Err(Error::invalid("landmark set is empty"));
        }
        let mut seen = vec![false; patch.n()];
        for &l in &landmarks.ids {
            if l >= patch.n() || std::mem::replace(&mut seen[l], true) {
                return Err(Error::invalid(format!("landmark {l} is out of range or repeated")));
            }
        }
        let rows: Vec<Vec<f64>> = dijkstra_many(patch, &landmarks.ids)?
            .into_iter()
            .map(|r| r.dist)
            .collect();
        for row in &rows {
            ensure_finite(row)?;
        }
        Ok(Self {
            landmarks: landmarks.clone(),
            rows,
        })
    }

    /// Embeds the patch into `R^q`.
    pub fn embed(&self, q: usize) -> Result<PatchEmbedding> {
        let nl = self.landmarks.len();
        if q == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        if nl <= q {
            return Err(Error::invalid(format!(
                "need more than q = {q} landmarks, got {nl}"
            )));
        }
        let ids = &self.landmarks.ids;
        let n = self.rows[0].len();

        // squared landmark geodesics, symmetrized against rounding in Dijkstra sums
        let mut d2 = DMatrix::<f64>::zeros(nl, nl);
        for i in 0..nl {
            for j in 0..nl {
                let a = self.rows[i][ids[j]];
                let b = self.rows[j][ids[i]];
                d2[(i, j)] = 0.5 * (a * a + b * b);
            }
        }
        let col_mean: Vec<f64> = (0..nl).map(|j| d2.column(j).sum() / nl as f64).collect();
        let grand = col_mean.iter().sum::<f64>() / nl as f64;
        let gram = DMatrix::from_fn(nl, nl, |i, j| -0.5 * (d2[(i, j)] - col_mean[i] - col_mean[j] + grand));

        let (eigenvalues, vectors) = symmetric_eigen_desc(gram);
        let degenerate = eigenvalues[..q].iter().any(|&l| l <= 0.0);
        if degenerate {
            log::warn!("landmark Gram matrix has nonpositive eigenvalues among the top {q}; zero coordinates used");
        }

        let mut coords = DMatrix::<f64>::zeros(n, q);
        // triangulation: y_v = 1/2 diag(lambda^-1/2) U^T (mean_sq - sq_v)
        let scale: Vec<f64> = eigenvalues[..q]
            .iter()
            .map(|&l| if l > 0.0 { 0.5 / l.sqrt() } else { 0.0 })
            .collect();
        let mut sq = vec![0.0; nl];
        for v in 0..n {
            for i in 0..nl {
                let d = self.rows[i][v];
                sq[i] = col_mean[i] - d * d;
            }
            for k in 0..q {
                if scale[k] == 0.0 {
                    continue;
                }
                let dot: f64 = (0..nl).map(|i| vectors[(i, k)] * sq[i]).sum();
                coords[(v, k)] = scale[k] * dot;
            }
        }
        // landmarks take their exact MDS coordinates
        for (i, &l) in ids.iter().enumerate() {
            for k in 0..q {
                coords[(l, k)] = if eigenvalues[k] > 0.0 {
                    eigenvalues[k].sqrt() * vectors[(i, k)]
                } else {
                    0.0
                };
            }
        }

        Ok(PatchEmbedding {
            coords,
            q,
            lost_energy: lost_energy(&eigenvalues, q),
            eigenvalues,
            degenerate,
            landmarks: ids.clone(),
        })
    }
}

/// Coordinates of one patch in `R^q` plus spectral diagnostics.
#[derive(Debug, Clone)]
pub struct PatchEmbedding {
    /// `N_r x q`, row `v` = coordinates of local vertex `v`.
    pub coords: DMatrix<f64>,
    pub q: usize,
    /// Full spectrum of the landmark Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
    pub lost_energy: f64,
    /// Some of the top `q` eigenvalues were nonpositive.
    pub degenerate: bool,
    pub landmarks: Vec<usize>,
}

impl PatchEmbedding {
    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    /// Embedding of a patch too small for `q` dimensions: as many true
    /// dimensions as the vertex count allows, zero-padded to `q`.
    pub fn small_patch(patch: &WeightedGraph, q: usize, seed: u64) -> Result<Self> {
        let n = patch.n();
        if n == 0 {
            return Err(Error::invalid("empty patch"));
        }
        if n == 1 {
            return Ok(Self {
                coords: DMatrix::zeros(1, q),
                q,
                eigenvalues: vec![0.0],
                lost_energy: 0.0,
                degenerate: true,
                landmarks: vec![0],
            });
        }
        let inner = LandmarkGeodesics::maxmin(patch, n, seed)?.embed((n - 1).min(q))?;
        let mut coords = DMatrix::zeros(n, q);
        coords.columns_mut(0, inner.q).copy_from(&inner.coords);
        Ok(Self {
            coords,
            q,
            lost_energy: lost_energy(&inner.eigenvalues, q),
            eigenvalues: inner.eigenvalues,
            degenerate: inner.degenerate || inner.q < q,
            landmarks: inner.landmarks,
        })
    }

    pub fn diagnostics(&self, patch: usize) -> EmbeddingDiagnostics {
        EmbeddingDiagnostics {
            patch,
            n_vertices: self.n(),
            n_landmarks: self.landmarks.len(),
            q: self.q,
            lost_energy: self.lost_energy,
            top_eigenvalues: self.eigenvalues.iter().take(DIAGNOSTIC_EIGENVALUES).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDiagnostics {
    pub patch: usize,
    pub n_vertices: usize,
    pub n_landmarks: usize,
    pub q: usize,
    pub lost_energy: f64,
    pub top_eigenvalues: Vec<f64>,
}

pub fn select_landmarks_maxmin(patch: &WeightedGraph, n_landmarks: usize, seed: u64) -> Result<LandmarkSet> {
    Ok(LandmarkGeodesics::maxmin(patch, n_landmarks, seed)?.landmarks)
}

pub fn landmark_isomap(patch: &WeightedGraph, landmarks: &LandmarkSet, q: usize) -> Result<PatchEmbedding> {
    if q == 0 || landmarks.len() <= q {
        return Err(Error::invalid(format!(
            "need q >= 1 and more than q landmarks (q = {q}, landmarks = {})",
            landmarks.len()
        )));
    }
    LandmarkGeodesics::for_landmarks(patch, landmarks)?.embed(q)
}

/// Share of the positive spectrum beyond the leading `q` eigenvalues.
pub fn lost_energy(eigenvalues: &[f64], q: usize) -> f64 {
    let total: f64 = eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    if total == 0.0 {
        return 0.0;
    }
    let tail: f64 = eigenvalues.iter().skip(q).map(|&l| l.max(0.0)).sum();
    (tail / total).clamp(0.0, 1.0)
}

/// Worst (largest) lost energy over the patches of a forest.
pub fn forest_lost_energy(per_patch: &[f64]) -> Result<f64> {
    per_patch
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::invalid("no patches"))
}
