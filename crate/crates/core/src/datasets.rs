//! Seeded synthetic point clouds and test signals.
//!
//! Every generator draws from one `ChaCha8Rng` stream seeded with
//! `seed_from_u64(seed)`, in the order documented on each function.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{euclidean, PointCloud};
use crate::linalg::{householder_qr, QrSigns};
use crate::samplets::{monomial, SampletForest};

pub use crate::io::load_point_cloud;

/// A point cloud together with the reference point `x*` of its test signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cloud: PointCloud,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    UnitSquare,
    SwissRoll,
    DeformedSphere,
    PointCloudFile,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::UnitSquare => "unit_square",
            Self::SwissRoll => "swiss_roll",
            Self::DeformedSphere => "deformed_sphere",
            Self::PointCloudFile => "point_cloud_file",
        }
    }
}

fn default_ambient_d() -> usize {
    100
}

fn default_noise() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Number of points; ignored for `point_cloud_file`.
    #[serde(default)]
    pub n: usize,
    /// Generator seed; defaults to the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_ambient_d")]
    pub ambient_d: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Input file for `point_cloud_file`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Overrides the dataset's reference point `x*`.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
}

impl DatasetSpec {
    pub fn new(kind: DatasetKind, n: usize) -> Self {
        Self {
            kind,
            n,
            seed: None,
            ambient_d: default_ambient_d(),
            noise: default_noise(),
            path: None,
            center: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != DatasetKind::PointCloudFile && self.n == 0 {
            return Err(Error::invalid("dataset needs at least one point"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::invalid(format!("noise amplitude must be a finite nonnegative number, got {}", self.noise)));
        }
        if self.kind == DatasetKind::UnitSquare && self.ambient_d < 2 {
            return Err(Error::invalid("the unit square needs an ambient dimension of at least 2"));
        }
        if self.kind == DatasetKind::PointCloudFile && self.path.is_none() {
            return Err(Error::invalid("point_cloud_file datasets need a path"));
        }
        Ok(())
    }

    /// Generates or loads the cloud; `run_seed` is used when `seed` is unset.
    pub fn generate(&self, run_seed: u64) -> Result<Dataset> {
        self.validate()?;
        let seed = self.seed.unwrap_or(run_seed);
        let mut data = match self.kind {
            DatasetKind::UnitSquare => gen_unit_square(self.n, self.ambient_d, self.noise, seed)?,
            DatasetKind::SwissRoll => gen_swiss_roll(self.n, seed)?,
            DatasetKind::DeformedSphere => gen_deformed_sphere(self.n, seed)?,
            DatasetKind::PointCloudFile => {
                let cloud = load_point_cloud(self.path.as_ref().expect("validated"))?;
                let center = vec![0.0; cloud.dim()];
                Dataset { cloud, center }
            }
        };
        if let Some(center) = &self.center {
            if center.len() != data.cloud.dim() {
                return Err(Error::invalid(format!(
                    "center has dimension {} but the cloud has dimension {}",
                    center.len(),
                    data.cloud.dim()
                )));
            }
            data.center = center.clone();
        }
        Ok(data)
    }
}

/// Uniform points of `[0,1]^2` placed in the first two coordinates of
/// `R^ambient_d`, rotated by the orthogonal factor of a Gaussian matrix and
/// perturbed by uniform noise in `noise * [-1, 1]`.
///
/// Draw order: the `ambient_d x ambient_d` Gaussian matrix row by row, then
/// per point its two coordinates followed by `ambient_d` noise values.
pub fn gen_unit_square(n: usize, ambient_d: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if ambient_d < 2 {
        return Err(Error::invalid("the unit square needs an ambient dimension of at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = ambient_d;
    let gauss: Vec<f64> = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
    let q = householder_qr(&nalgebra::DMatrix::from_row_slice(d, d, &gauss), QrSigns::NonNegativeDiagonal).q;
    let embed = |u: f64, v: f64| -> Vec<f64> { (0..d).map(|k| q[(k, 0)] * u + q[(k, 1)] * v).collect() };
    let mut flat = Vec::with_capacity(n * d);
    for _ in 0..n {
        let (u, v) = (rng.random::<f64>(), rng.random::<f64>());
        let mut p = embed(u, v);
        for x in p.iter_mut() {
            *x += noise * (2.0 * rng.random::<f64>() - 1.0);
        }
        flat.extend(p);
    }
    Ok(Dataset {
        cloud: PointCloud::from_flat(d, flat)?,
        center: embed(0.5, 0.5),
    })
}

fn normalize_in_place(flat: &mut [f64], dim: usize, extra: &mut [f64]) {
    let n = flat.len() / dim;
    let mut mean = vec![0.0; dim];
    for p in flat.chunks(dim) {
        for k in 0..dim {
            mean[k] += p[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut longest = 0.0f64;
    for k in 0..dim {
        let (lo, hi) = flat
            .chunks(dim)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])));
        longest = longest.max(hi - lo);
    }
    let scale = if longest > 0.0 { 1.0 / longest } else { 1.0 };
    for p in flat.chunks_mut(dim).chain(std::iter::once(extra)) {
        for k in 0..dim {
            p[k] = (p[k] - mean[k]) * scale;
        }
    }
}

/// Swiss roll `(t cos t, v, t sin t)` with `(t, v)` uniform in
/// `[1.5 pi, 4.5 pi] x [0, 10]`, centered at the sample mean and scaled so the
/// longest bounding-box edge has length 1. Draw order: `t` then `v` per point.
pub fn gen_swiss_roll(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roll = |t: f64, v: f64| [t * t.cos(), v, t * t.sin()];
    let mut flat = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let t = 1.5 * PI + 3.0 * PI * rng.random::<f64>();
        let v = 10.0 * rng.random::<f64>();
        flat.extend(roll(t, v));
    }
    let mut center = roll(3.0 * PI, 5.0).to_vec();
    normalize_in_place(&mut flat, 3, &mut center);
    Ok(Dataset {
        cloud: PointCloud::from_flat(3, flat)?,
        center,
    })
}

fn sphere_radius(u: [f64; 3]) -> f64 {
    1.0 + 0.3 * u[0] * u[1] + 0.25 * u[2] * u[2] * u[2]
}

/// Closed surface standing in for a scanned mesh: directions uniform on the
/// unit sphere scaled by `1 + 0.3 x y + 0.25 z^3`, then centered and scaled
/// so the longest bounding-box edge has length 1. `x*` is the surface point
/// in direction `(0.6, 0, 0.8)`. Draw order: three standard normals per point.
pub fn gen_deformed_sphere(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let surface = |u: [f64; 3]| {
        let r = sphere_radius(u);
        [r * u[0], r * u[1], r * u[2]]
    };
    let mut flat = Vec::with_capacity(3 * n);
    while flat.len() < 3 * n {
        let g: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if norm == 0.0 {
            continue;
        }
        flat.extend(surface([g[0] / norm, g[1] / norm, g[2] / norm]));
    }
    let mut center = surface([0.6, 0.0, 0.8]).to_vec();
    normalize_in_place(&mut flat, 3, &mut center);
    Ok(Dataset {
        cloud: PointCloud::from_flat(3, flat)?,
        center,
    })
}

fn default_frequency() -> f64 {
    1.0
}

/// Test signals. Ambient kinds use the distance `r = |x - x*|`; embedded
/// kinds are evaluated in the patch embedding around vertex `v0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    /// `exp(-decay r) cos(frequency pi r)`.
    DampedCosine { decay: f64, frequency: f64 },
    /// `cos(frequency pi r)`.
    PlainCosine {
        #[serde(default = "default_frequency")]
        frequency: f64,
    },
    /// `|phi(v) - phi(v0)|^gamma` in embedded coordinates.
    RadialPower { gamma: f64, v0: usize },
    /// `sum_beta c_beta (zeta(v) - zeta(v0))^beta` in normalized patch coordinates.
    EmbeddedPolynomial { v0: usize, terms: Vec<(Vec<u32>, f64)> },
}

impl SignalSpec {
    /// The test signal paired with each dataset.
    pub fn default_for(kind: DatasetKind) -> Self {
        match kind {
            DatasetKind::UnitSquare | DatasetKind::PointCloudFile => Self::DampedCosine {
                decay: 4.0,
                frequency: 8.0,
            },
            DatasetKind::SwissRoll => Self::PlainCosine { frequency: 1.0 },
            DatasetKind::DeformedSphere => Self::DampedCosine {
                decay: 10.0,
                frequency: 20.0,
            },
        }
    }

    pub fn is_embedded(&self) -> bool {
        matches!(self, Self::RadialPower { .. } | Self::EmbeddedPolynomial { .. })
    }

    fn validate(&self) -> Result<()> {
        let finite = match self {
            Self::DampedCosine { decay, frequency } => decay.is_finite() && frequency.is_finite(),
            Self::PlainCosine { frequency } => frequency.is_finite(),
            Self::RadialPower { gamma, .. } => gamma.is_finite(),
            Self::EmbeddedPolynomial { terms, .. } => terms.iter().all(|(_, c)| c.is_finite()),
        };
        if finite {
            Ok(())
        } else {
            Err(Error::invalid("signal parameters must be finite"))
        }
    }
}

/// Where a signal is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum SignalDomain<'a> {
    Ambient { cloud: &'a PointCloud, center: &'a [f64] },
    /// Patch embeddings; in patches not containing `v0` the embedded center is
    /// the patch's bounding-box center.
    Embedded(&'a SampletForest),
}

pub fn eval_signal(spec: &SignalSpec, domain: SignalDomain<'_>) -> Result<Vec<f64>> {
    spec.validate()?;
    match (spec, domain) {
        (SignalSpec::DampedCosine { .. } | SignalSpec::PlainCosine { .. }, SignalDomain::Ambient { cloud, center }) => {
            if center.len() != cloud.dim() {
                return Err(Error::invalid(format!(
                    "center has dimension {} but the cloud has dimension {}",
                    center.len(),
                    cloud.dim()
                )));
            }
            Ok(cloud
                .points()
                .map(|x| {
                    let r = euclidean(x, center);
                    match *spec {
                        SignalSpec::DampedCosine { decay, frequency } => (-decay * r).exp() * (frequency * PI * r).cos(),
                        SignalSpec::PlainCosine { frequency } => (frequency * PI * r).cos(),
                        _ => unreachable!(),
                    }
                })
                .collect())
        }
        (SignalSpec::RadialPower { gamma, v0 }, SignalDomain::Embedded(forest)) => {
            eval_embedded(forest, *v0, false, |z, c| {
                let r = z.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                r.powf(*gamma)
            })
        }
        (SignalSpec::EmbeddedPolynomial { v0, terms }, SignalDomain::Embedded(forest)) => {
            let q = forest.trees()[0].mis().q();
            if let Some((beta, _)) = terms.iter().find(|(beta, _)| beta.len() != q) {
                return Err(Error::invalid(format!(
                    "multi-index {beta:?} does not match the embedding dimension {q}"
                )));
            }
            let mut diff = vec![0.0; q];
            eval_embedded(forest, *v0, true, |z, c| {
                for k in 0..q {
                    diff[k] = z[k] - c[k];
                }
                terms.iter().map(|(beta, coef)| coef * monomial(&diff, beta)).sum()
            })
        }
        (_, SignalDomain::Ambient { .. }) => Err(Error::invalid("embedded signals need patch embeddings")),
        (_, SignalDomain::Embedded(_)) => Err(Error::invalid("ambient signals need the point cloud")),
    }
}

fn eval_embedded(
    forest: &SampletForest,
    v0: usize,
    normalized: bool,
    mut f: impl FnMut(&[f64], &[f64]) -> f64,
) -> Result<Vec<f64>> {
    if v0 >= forest.len() {
        return Err(Error::invalid(format!("reference vertex {v0} is out of range")));
    }
    let mut out = vec![0.0; forest.len()];
    for (r, tree) in forest.trees().iter().enumerate() {
        let coords = if normalized { tree.normalized_coords() } else { tree.coords() };
        let q = coords.ncols();
        let row = |i: usize| -> Vec<f64> { (0..q).map(|k| coords[(i, k)]).collect() };
        let vertices = forest.patch_vertices(r);
        let center = match vertices.iter().position(|&v| v == v0) {
            Some(i) => row(i),
            None if normalized => vec![0.0; q],
            None => tree.frame().center.clone(),
        };
        for (i, &v) in vertices.iter().enumerate() {
            out[v] = f(&row(i), &center);
        }
    }
    Ok(out)
}
