//! Invariant suite over every configuration of a pipeline sweep: orthogonality,
//! vanishing moments, energy conservation, dense-oracle equivalence,
//! compression bounds and determinism.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::compress::{compress, node_energies};
use crate::datasets::SignalSpec;
use crate::error::Result;
use crate::graph::build_epsilon_graph;
use crate::partition::{partition_graph, Partition};
use crate::pipeline::{build_forest, embed_partition, evaluate_signal, PipelineConfig};
use crate::samplets::{moment_residuals, CoefficientKind, MomentResidual, SampletForest, SampletOptions, SampletTree};

/// Tolerance of the transform invariants.
pub const TRANSFORM_TOL: f64 = 1e-10;
/// Relative tolerance of polynomial annihilation against `max |f|`.
pub const ANNIHILATION_TOL: f64 = 1e-8;
/// Largest patch assembled densely; larger patches are checked on a prefix of this size.
pub const DENSE_ORACLE_MAX: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub p: usize,
    pub q: usize,
    pub s_plus_1: usize,
    pub status: Status,
    /// Observed worst-case quantity.
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    /// Checks named `check`, across configurations.
    pub fn named<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a CheckResult> + 'a {
        self.checks.iter().filter(move |c| c.check == check)
    }

    /// True if every check named `check` passed and at least one ran.
    pub fn all_pass(&self, check: &str) -> bool {
        let mut any = false;
        for c in self.named(check) {
            if c.status == Status::Fail {
                return false;
            }
            any |= c.status == Status::Pass;
        }
        any
    }
}

struct Ctx {
    p: usize,
    q: usize,
    m: usize,
    out: Vec<CheckResult>,
}

impl Ctx {
    fn bound(&mut self, check: &str, value: f64, tolerance: f64, detail: impl Into<String>) {
        let status = if value <= tolerance { Status::Pass } else { Status::Fail };
        self.push(check, status, Some(value), Some(tolerance), detail.into());
    }

    fn flag(&mut self, check: &str, ok: bool, detail: impl Into<String>) {
        let status = if ok { Status::Pass } else { Status::Fail };
        self.push(check, status, None, None, detail.into());
    }

    fn push(&mut self, check: &str, status: Status, value: Option<f64>, tolerance: Option<f64>, detail: String) {
        self.out.push(CheckResult {
            check: check.to_string(),
            p: self.p,
            q: self.q,
            s_plus_1: self.m,
            status,
            value,
            tolerance,
            detail,
        });
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Dense assembly versus the fast transform on one tree.
fn dense_oracle(tree: &SampletTree, values: &[f64]) -> (f64, f64) {
    let t = tree.assemble_dense();
    let n = tree.len();
    let dense = &t * DVector::from_column_slice(values);
    let apply = max_abs_diff(dense.as_slice(), &tree.forward(values));
    let ortho = (&t * t.transpose() - DMatrix::<f64>::identity(n, n)).amax();
    (apply, ortho)
}

fn check_dense(ctx: &mut Ctx, forest: &SampletForest, signal: &[f64], options: &SampletOptions) -> Result<()> {
    let (mut apply, mut ortho) = (0.0f64, 0.0f64);
    let mut reduced = 0;
    for (r, tree) in forest.trees().iter().enumerate() {
        let local: Vec<f64> = forest.patch_vertices(r).iter().map(|&v| signal[v]).collect();
        let (a, o) = if tree.len() <= DENSE_ORACLE_MAX {
            dense_oracle(tree, &local)
        } else {
            reduced += 1;
            let coords = tree.coords().rows(0, DENSE_ORACLE_MAX).into_owned();
            let small = SampletTree::from_embedding(&coords, options)?;
            dense_oracle(&small, &local[..DENSE_ORACLE_MAX])
        };
        apply = apply.max(a);
        ortho = ortho.max(o);
    }
    let detail = format!("{} patches, {reduced} checked on a {DENSE_ORACLE_MAX}-point prefix", forest.trees().len());
    ctx.bound("dense_oracle", apply, TRANSFORM_TOL, detail.clone());
    ctx.bound("orthogonality", ortho, TRANSFORM_TOL, detail);
    Ok(())
}

/// Sum of all monomials of degree at most `s`, in normalized coordinates.
fn full_polynomial(forest: &SampletForest, v0: usize) -> SignalSpec {
    let terms = forest.trees()[0]
        .mis()
        .indices()
        .iter()
        .map(|alpha| (alpha.clone(), 1.0))
        .collect();
    SignalSpec::EmbeddedPolynomial { v0, terms }
}

fn check_annihilation(ctx: &mut Ctx, forest: &SampletForest) -> Result<()> {
    let f = crate::datasets::eval_signal(&full_polynomial(forest, 0), crate::datasets::SignalDomain::Embedded(forest))?;
    let coeffs = forest.forward(&f)?;
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = coeffs
        .tags
        .iter()
        .zip(&coeffs.values)
        .filter(|(t, _)| t.kind == CoefficientKind::Samplet)
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let rel = if scale > 0.0 { worst / scale } else { worst };
    ctx.bound("polynomial_annihilation", rel, ANNIHILATION_TOL, "max |samplet coefficient| / max |f|");
    Ok(())
}

struct Prepared {
    partitions: Vec<(usize, Partition)>,
    coords: BTreeMap<(usize, usize), Vec<DMatrix<f64>>>,
}

fn prepare(config: &PipelineConfig, graph: &crate::graph::WeightedGraph) -> Result<Prepared> {
    let mut partitions = Vec::new();
    let mut coords = BTreeMap::new();
    for &p in &config.patches {
        let part = partition_graph(graph, p, config.seed)?;
        for &q in &config.dims {
            let emb = embed_partition(&part, q, config.landmarks, config.seed)?;
            coords.insert((p, q), emb.into_iter().map(|e| e.coords).collect());
        }
        partitions.push((p, part));
    }
    Ok(Prepared { partitions, coords })
}

/// Runs every invariant on every `(p, q, s + 1)` of the sweep.
pub fn verify(config: &PipelineConfig) -> Result<VerifyReport> {
    config.validate()?;
    let data = config.dataset.generate(config.seed)?;
    let graph = build_epsilon_graph(&data.cloud, config.graph_eps)?.graph;
    let spec = config.signal();

    let mut canonical = config.clone();
    canonical.faults.clear();
    canonical.threads = Some(1);
    let reference = canonical.install(|| -> Result<BTreeMap<(usize, usize, usize), Vec<f64>>> {
        let prep = prepare(&canonical, &graph)?;
        let mut out = BTreeMap::new();
        for (p, part) in &prep.partitions {
            for &q in &canonical.dims {
                for &m in &canonical.moments {
                    let forest = build_forest(part, prep.coords[&(*p, q)].clone(), &canonical.samplet_options(m)?)?;
                    let f = evaluate_signal(&spec, &data.cloud, &data.center, &forest)?;
                    out.insert((*p, q, m), forest.forward(&f)?.values);
                }
            }
        }
        Ok(out)
    })??;

    let checks = config.install(|| -> Result<Vec<CheckResult>> {
        let prep = prepare(config, &graph)?;
        let mut all = Vec::new();
        for (p, part) in &prep.partitions {
            for &q in &config.dims {
                for &m in &config.moments {
                    let mut ctx = Ctx {
                        p: *p,
                        q,
                        m,
                        out: Vec::new(),
                    };
                    let options = config.samplet_options(m)?;
                    let forest = build_forest(part, prep.coords[&(*p, q)].clone(), &options)?;
                    let f = evaluate_signal(&spec, &data.cloud, &data.center, &forest)?;
                    let coeffs = forest.forward(&f)?.values;
                    let nf = norm(&f);

                    ctx.bound("norm_preservation", (norm(&coeffs) - nf).abs() / nf, TRANSFORM_TOL, "| |Tf| - |f| | / |f|");
                    let back = forest.inverse(&coeffs)?;
                    let diff: Vec<f64> = back.iter().zip(&f).map(|(a, b)| a - b).collect();
                    ctx.bound("round_trip", norm(&diff) / nf, TRANSFORM_TOL, "|T^T T f - f| / |f|");

                    let moments = forest
                        .trees()
                        .iter()
                        .map(moment_residuals)
                        .fold(MomentResidual::default(), MomentResidual::merge);
                    let detail = format!("{} samplets", moments.samplets);
                    ctx.bound("vanishing_moments", moments.max_abs, TRANSFORM_TOL, detail.clone());
                    ctx.bound("unit_norm", moments.max_norm_defect, TRANSFORM_TOL, detail);
                    check_annihilation(&mut ctx, &forest)?;

                    let energies = node_energies(&forest, &coeffs)?;
                    let root: f64 = energies.iter().map(|e| e.energy[0]).sum();
                    let total = nf * nf;
                    ctx.bound("energy_conservation", (root - total).abs() / total, TRANSFORM_TOL, "sum of root energies vs |f|^2");

                    check_dense(&mut ctx, &forest, &f, &options)?;

                    let c = compress(&forest, &f, &coeffs, config.threshold)?;
                    let tol = config.threshold * (1.0 + 1e-12);
                    ctx.bound("compression_at", c.rel_err_at, tol, format!("nnz {}", c.at.sparse.nnz()));
                    ctx.bound("compression_nt", c.rel_err_nt, tol, format!("nnz {}", c.nt.nnz()));
                    ctx.flag(
                        "nnz_nt_le_at",
                        c.nt.nnz() <= c.at.sparse.nnz(),
                        format!("nt {} at {}", c.nt.nnz(), c.at.sparse.nnz()),
                    );

                    let same = reference[&(*p, q, m)].iter().zip(&coeffs).all(|(a, b)| a.to_bits() == b.to_bits());
                    ctx.flag(
                        "determinism",
                        same,
                        "coefficients bit-identical to a canonical single-threaded rebuild",
                    );
                    all.extend(ctx.out);
                }
            }
        }
        Ok(all)
    })??;

    let passed = checks.iter().all(|c| c.status != Status::Fail);
    Ok(VerifyReport { passed, checks })
}
