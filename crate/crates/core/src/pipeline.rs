//! End-to-end pipeline: generate, graph, partition, embed, transform,
//! compress and report, each stage reading and writing files in one output
//! directory so stages can be rerun individually.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compress::{compress, write_report_csv, PatchCompression, ReportRow};
use crate::datasets::{eval_signal, DatasetSpec, SignalDomain, SignalSpec};
use crate::embed::{forest_lost_energy, EmbeddingDiagnostics, LandmarkGeodesics, PatchEmbedding};
use crate::error::{Error, Result};
use crate::graph::{build_epsilon_graph, component_count, connected_components, EpsilonGraph, PointCloud, WeightedGraph};
use crate::io;
use crate::linalg::QrSigns;
use crate::partition::{partition_graph, partition_quality, Partition, PartitionQuality};
use crate::samplets::{decay_report, SampletForest, SampletOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// Deliberate defects for exercising the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Keep the Householder reflectors' natural signs in every QR.
    SkipQrSign,
}

fn default_patches() -> Vec<usize> {
    vec![1]
}

fn default_dims() -> Vec<usize> {
    vec![2]
}

fn default_landmarks() -> usize {
    100
}

fn default_moments() -> Vec<usize> {
    vec![1, 2, 3, 4, 5]
}

fn default_threshold() -> f64 {
    1e-2
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub dataset: DatasetSpec,
    /// Defaults to the dataset's standard test signal.
    #[serde(default)]
    pub signal: Option<SignalSpec>,
    /// Radius of the epsilon-ball graph.
    pub graph_eps: f64,
    #[serde(default = "default_patches")]
    pub patches: Vec<usize>,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_landmarks")]
    pub landmarks: usize,
    /// Vanishing-moment counts `s + 1` to sweep.
    #[serde(default = "default_moments")]
    pub moments: Vec<usize>,
    /// Compression epsilon shared by both strategies.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Record wall-clock times; reports are then no longer reproducible byte for byte.
    #[serde(default)]
    pub timings: bool,
    #[serde(default)]
    pub leaf_capacity: Option<usize>,
    #[serde(default)]
    pub faults: Vec<Fault>,
}

impl PipelineConfig {
    pub fn new(dataset: DatasetSpec, graph_eps: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset,
            signal: None,
            graph_eps,
            patches: default_patches(),
            dims: default_dims(),
            landmarks: default_landmarks(),
            moments: default_moments(),
            threshold: default_threshold(),
            seed: 0,
            threads: None,
            out: default_out(),
            timings: false,
            leaf_capacity: None,
            faults: Vec::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        io::load_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.dataset.validate()?;
        if !(self.graph_eps > 0.0 && self.graph_eps.is_finite()) {
            return Err(Error::invalid(format!("graph epsilon must be positive, got {}", self.graph_eps)));
        }
        for (name, list) in [("patches", &self.patches), ("dims", &self.dims), ("moments", &self.moments)] {
            if list.is_empty() || list.contains(&0) {
                return Err(Error::invalid(format!("{name} must be a nonempty list of positive integers")));
            }
        }
        let max_q = *self.dims.iter().max().expect("nonempty");
        if self.landmarks <= max_q {
            return Err(Error::invalid(format!(
                "landmark count {} must exceed the largest embedding dimension {max_q}",
                self.landmarks
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("thread count must be at least 1"));
        }
        if self.leaf_capacity == Some(0) {
            return Err(Error::invalid("leaf capacity must be at least 1"));
        }
        Ok(())
    }

    pub fn signal(&self) -> SignalSpec {
        self.signal.clone().unwrap_or_else(|| SignalSpec::default_for(self.dataset.kind))
    }

    pub fn samplet_options(&self, s_plus_1: usize) -> Result<SampletOptions> {
        let mut o = SampletOptions::with_moments(s_plus_1)?;
        o.leaf_capacity = self.leaf_capacity;
        if self.faults.contains(&Fault::SkipQrSign) {
            o.signs = QrSigns::Reflector;
        }
        Ok(o)
    }

    /// Every `(p, q, s + 1)` of the sweep, in report order.
    pub fn sweep(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for &q in &self.dims {
            for &p in &self.patches {
                for &m in &self.moments {
                    out.push((p, q, m));
                }
            }
        }
        out
    }

    /// Runs `f` on a pool capped at `threads` workers.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            builder = builder.num_threads(t);
        }
        Ok(builder.build()?.install(f))
    }
}

/// One pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Gen,
    Graph,
    Partition,
    Embed,
    Transform,
    Compress,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Gen,
        Stage::Graph,
        Stage::Partition,
        Stage::Embed,
        Stage::Transform,
        Stage::Compress,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Gen => "gen",
            Stage::Graph => "graph",
            Stage::Partition => "partition",
            Stage::Embed => "embed",
            Stage::Transform => "transform",
            Stage::Compress => "compress",
            Stage::Report => "report",
        }
    }
}

/// File names inside the output directory.
pub struct Artifacts<'a> {
    pub dir: &'a Path,
}

impl Artifacts<'_> {
    pub fn cloud(&self) -> PathBuf {
        self.dir.join("cloud.csv")
    }
    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.json")
    }
    pub fn graph(&self) -> PathBuf {
        self.dir.join("graph.txt")
    }
    pub fn graph_info(&self) -> PathBuf {
        self.dir.join("graph.json")
    }
    pub fn partition(&self, p: usize) -> PathBuf {
        self.dir.join(format!("partition_p{p}.csv"))
    }
    pub fn partition_info(&self, p: usize) -> PathBuf {
        self.dir.join(format!("partition_p{p}.json"))
    }
    pub fn embedding(&self, p: usize, q: usize) -> PathBuf {
        self.dir.join(format!("embedding_p{p}_q{q}.csv"))
    }
    pub fn embedding_info(&self, p: usize, q: usize) -> PathBuf {
        self.dir.join(format!("embedding_p{p}_q{q}.json"))
    }
    pub fn signal(&self, p: usize, q: usize) -> PathBuf {
        self.dir.join(format!("signal_p{p}_q{q}.csv"))
    }
    pub fn coefficients(&self, p: usize, q: usize, m: usize) -> PathBuf {
        self.dir.join(format!("coefficients_p{p}_q{q}_m{m}.csv"))
    }
    pub fn decay(&self, p: usize, q: usize, m: usize) -> PathBuf {
        self.dir.join(format!("decay_p{p}_q{q}_m{m}.csv"))
    }
    pub fn transform_info(&self, p: usize, q: usize, m: usize) -> PathBuf {
        self.dir.join(format!("transform_p{p}_q{q}_m{m}.json"))
    }
    pub fn sparse_at(&self, p: usize, q: usize, m: usize) -> PathBuf {
        self.dir.join(format!("sparse_at_p{p}_q{q}_m{m}.csv"))
    }
    pub fn sparse_nt(&self, p: usize, q: usize, m: usize) -> PathBuf {
        self.dir.join(format!("sparse_nt_p{p}_q{q}_m{m}.csv"))
    }
    pub fn row(&self, p: usize, q: usize, m: usize) -> PathBuf {
        self.dir.join(format!("row_p{p}_q{q}_m{m}.json"))
    }
    pub fn report_json(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn report_csv(&self) -> PathBuf {
        self.dir.join("report.csv")
    }
    pub fn nnz_plot(&self) -> PathBuf {
        self.dir.join("nnz_vs_moments.csv")
    }
}

fn require(path: PathBuf, stage: Stage) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact {
            file: path,
            stage: stage.name(),
        })
    }
}

fn mismatch(file: PathBuf, message: impl Into<String>) -> Error {
    Error::ArtifactMismatch {
        file,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n: usize,
    pub dim: usize,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphInfo {
    pub n: usize,
    pub edges: usize,
    pub epsilon: f64,
    pub dropped_duplicates: usize,
    pub components: usize,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionInfo {
    pub p: usize,
    pub quality: PartitionQuality,
    pub max_patch_size: usize,
    pub warnings: Vec<String>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingInfo {
    pub p: usize,
    pub q: usize,
    pub lost_energy: f64,
    pub patches: Vec<EmbeddingDiagnostics>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformInfo {
    pub p: usize,
    pub q: usize,
    pub s_plus_1: usize,
    pub depth: Vec<usize>,
    pub wall_ms_build: Option<f64>,
    pub wall_ms_transform: Option<f64>,
}

/// A report row with its per-patch breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    pub row: ReportRow,
    pub patches: Vec<PatchCompression>,
}

fn elapsed(config: &PipelineConfig, start: Instant) -> Option<f64> {
    config.timings.then(|| start.elapsed().as_secs_f64() * 1e3)
}

/// Embeds every patch of `partition` into `R^q`, in parallel over patches.
pub fn embed_partition(partition: &Partition, q: usize, landmarks: usize, seed: u64) -> Result<Vec<PatchEmbedding>> {
    partition
        .patches()
        .par_iter()
        .map(|patch| {
            let n = patch.graph.n();
            let nl = landmarks.min(n);
            if nl <= q {
                PatchEmbedding::small_patch(&patch.graph, q, seed)
            } else {
                LandmarkGeodesics::maxmin(&patch.graph, nl, seed)?.embed(q)
            }
        })
        .collect()
}

/// Samplet forest over the patches of `partition` with the given embeddings.
pub fn build_forest(
    partition: &Partition,
    coords: Vec<nalgebra::DMatrix<f64>>,
    options: &SampletOptions,
) -> Result<SampletForest> {
    let patches = partition
        .patches()
        .iter()
        .zip(coords)
        .map(|(patch, c)| (patch.vertices.clone(), c))
        .collect();
    SampletForest::build(partition.n(), patches, options)
}

/// `gen`: creates `cloud.csv` and `dataset.json`.
pub fn stage_gen(config: &PipelineConfig) -> Result<()> {
    let a = Artifacts { dir: &config.out };
    let data = config.dataset.generate(config.seed)?;
    io::save_point_cloud(a.cloud(), &data.cloud)?;
    io::save_json(
        a.dataset(),
        &DatasetInfo {
            name: config.dataset.kind.as_str().to_string(),
            n: data.cloud.len(),
            dim: data.cloud.dim(),
            center: data.center,
        },
    )
}

fn load_graph(a: &Artifacts) -> Result<WeightedGraph> {
    io::load_graph(require(a.graph(), Stage::Graph)?)
}

/// `graph`: epsilon-ball graph of `cloud.csv` into `graph.txt`.
pub fn stage_graph(config: &PipelineConfig) -> Result<()> {
    let a = Artifacts { dir: &config.out };
    let cloud = io::load_point_cloud(require(a.cloud(), Stage::Gen)?)?;
    let start = Instant::now();
    let EpsilonGraph {
        graph,
        dropped_duplicates,
    } = build_epsilon_graph(&cloud, config.graph_eps)?;
    let wall_ms = elapsed(config, start);
    io::save_graph(a.graph(), &graph)?;
    io::save_json(
        a.graph_info(),
        &GraphInfo {
            n: graph.n(),
            edges: graph.edge_count(),
            epsilon: config.graph_eps,
            dropped_duplicates,
            components: component_count(&connected_components(&graph)),
            wall_ms,
        },
    )
}

fn load_partition(a: &Artifacts, graph: &WeightedGraph, p: usize) -> Result<Partition> {
    let file = require(a.partition(p), Stage::Partition)?;
    let labels = io::load_labels(&file)?;
    if labels.len() != graph.n() {
        return Err(mismatch(
            file,
            format!("{} labels for a graph with {} vertices", labels.len(), graph.n()),
        ));
    }
    Partition::from_labels(graph, labels, p).map_err(|e| mismatch(file, e.to_string()))
}

/// `partition`: one `partition_p{p}.csv` per patch count.
pub fn stage_partition(config: &PipelineConfig) -> Result<()> {
    let a = Artifacts { dir: &config.out };
    let graph = load_graph(&a)?;
    for &p in &config.patches {
        let start = Instant::now();
        let part = partition_graph(&graph, p, config.seed)?;
        let wall_ms = elapsed(config, start);
        io::save_labels(a.partition(p), part.labels())?;
        io::save_json(
            a.partition_info(p),
            &PartitionInfo {
                p,
                quality: partition_quality(&part, &graph),
                max_patch_size: part.max_patch_size(),
                warnings: part.warnings().to_vec(),
                wall_ms,
            },
        )?;
    }
    Ok(())
}

/// Per-patch embedded coordinates, rows in the patch's vertex order.
fn load_embedding(a: &Artifacts, partition: &Partition, p: usize, q: usize) -> Result<Vec<nalgebra::DMatrix<f64>>> {
    let file = require(a.embedding(p, q), Stage::Embed)?;
    let (vertices, coords) = io::load_embedding(&file)?;
    if coords.ncols() != q {
        return Err(mismatch(file, format!("expected {q} coordinates per row, found {}", coords.ncols())));
    }
    let mut at = 0;
    let mut out = Vec::with_capacity(partition.p());
    for patch in partition.patches() {
        let len = patch.vertices.len();
        if at + len > vertices.len() || vertices[at..at + len] != patch.vertices[..] {
            return Err(mismatch(file, "embedding rows do not follow the partition's patch order"));
        }
        out.push(coords.rows(at, len).into_owned());
        at += len;
    }
    if at != vertices.len() {
        return Err(mismatch(file, "embedding has rows beyond the partition"));
    }
    Ok(out)
}

/// `embed`: landmark Isomap of every patch, one file per `(p, q)`.
pub fn stage_embed(config: &PipelineConfig) -> Result<()> {
    let a = Artifacts { dir: &config.out };
    let graph = load_graph(&a)?;
    for &p in &config.patches {
        let partition = load_partition(&a, &graph, p)?;
        for &q in &config.dims {
            let start = Instant::now();
            let embeddings = embed_partition(&partition, q, config.landmarks, config.seed)?;
            let wall_ms = elapsed(config, start);
            let vertices: Vec<usize> = partition.patches().iter().flat_map(|pa| pa.vertices.iter().copied()).collect();
            let mut coords = nalgebra::DMatrix::zeros(vertices.len(), q);
            let mut at = 0;
            for e in &embeddings {
                coords.rows_mut(at, e.n()).copy_from(&e.coords);
                at += e.n();
            }
            io::save_embedding(a.embedding(p, q), &vertices, &coords)?;
            let lost: Vec<f64> = embeddings.iter().map(|e| e.lost_energy).collect();
            io::save_json(
                a.embedding_info(p, q),
                &EmbeddingInfo {
                    p,
                    q,
                    lost_energy: forest_lost_energy(&lost)?,
                    patches: embeddings.iter().enumerate().map(|(r, e)| e.diagnostics(r)).collect(),
                    wall_ms,
                },
            )?;
        }
    }
    Ok(())
}

fn signal_values(config: &PipelineConfig, a: &Artifacts, forest: &SampletForest) -> Result<Vec<f64>> {
    let spec = config.signal();
    if spec.is_embedded() {
        return eval_signal(&spec, SignalDomain::Embedded(forest));
    }
    let cloud: PointCloud = io::load_point_cloud(require(a.cloud(), Stage::Gen)?)?;
    let info: DatasetInfo = io::load_json(require(a.dataset(), Stage::Gen)?)?;
    if cloud.len() != forest.len() {
        return Err(mismatch(a.cloud(), format!("{} points for a graph with {} vertices", cloud.len(), forest.len())));
    }
    evaluate_signal(&spec, &cloud, &info.center, forest)
}

/// Evaluates `spec` on the ambient cloud or on the forest's embeddings.
pub fn evaluate_signal(spec: &SignalSpec, cloud: &PointCloud, center: &[f64], forest: &SampletForest) -> Result<Vec<f64>> {
    if spec.is_embedded() {
        eval_signal(spec, SignalDomain::Embedded(forest))
    } else {
        eval_signal(spec, SignalDomain::Ambient { cloud, center })
    }
}

/// `transform`: forward samplet transform of the signal for every sweep entry.
pub fn stage_transform(config: &PipelineConfig) -> Result<()> {
    let a = Artifacts { dir: &config.out };
    let graph = load_graph(&a)?;
    for &p in &config.patches {
        let partition = load_partition(&a, &graph, p)?;
        for &q in &config.dims {
            let coords = load_embedding(&a, &partition, p, q)?;
            let mut signal = None;
            for &m in &config.moments {
                let start = Instant::now();
                let forest = build_forest(&partition, coords.clone(), &config.samplet_options(m)?)?;
                let wall_ms_build = elapsed(config, start);
                let f = match &signal {
                    Some(f) => f,
                    None => {
                        let values = signal_values(config, &a, &forest)?;
                        io::save_signal(a.signal(p, q), &values)?;
                        signal.insert(values)
                    }
                };
                let start = Instant::now();
                let coeffs = forest.forward(f)?;
                let wall_ms_transform = elapsed(config, start);
                io::save_coefficients(a.coefficients(p, q, m), &coeffs.tags, &coeffs.values)?;
                io::save_records(a.decay(p, q, m), &decay_report(&forest, &coeffs.values))?;
                io::save_json(
                    a.transform_info(p, q, m),
                    &TransformInfo {
                        p,
                        q,
                        s_plus_1: m,
                        depth: forest.trees().iter().map(|t| t.tree().depth()).collect(),
                        wall_ms_build,
                        wall_ms_transform,
                    },
                )?;
            }
        }
    }
    Ok(())
}

/// `compress`: AT and NT on every coefficient file, one report row each.
pub fn stage_compress(config: &PipelineConfig) -> Result<()> {
    let a = Artifacts { dir: &config.out };
    let graph = load_graph(&a)?;
    let info: DatasetInfo = io::load_json(require(a.dataset(), Stage::Gen)?)?;
    for &p in &config.patches {
        let partition = load_partition(&a, &graph, p)?;
        for &q in &config.dims {
            let coords = load_embedding(&a, &partition, p, q)?;
            let emb: EmbeddingInfo = io::load_json(require(a.embedding_info(p, q), Stage::Embed)?)?;
            let signal = io::load_signal(require(a.signal(p, q), Stage::Transform)?)?;
            for &m in &config.moments {
                let forest = build_forest(&partition, coords.clone(), &config.samplet_options(m)?)?;
                let file = require(a.coefficients(p, q, m), Stage::Transform)?;
                let (_, values) = io::load_coefficients(&file)?;
                if values.len() != forest.len() || signal.len() != forest.len() {
                    return Err(mismatch(file, "coefficient or signal length differs from the graph size"));
                }
                let t: TransformInfo = io::load_json(require(a.transform_info(p, q, m), Stage::Transform)?)?;
                let out = compress(&forest, &signal, &values, config.threshold)?;
                io::save_sparse(a.sparse_at(p, q, m), &out.at.sparse.kept)?;
                io::save_sparse(a.sparse_nt(p, q, m), &out.nt.kept)?;
                let row = ReportRow {
                    dataset: info.name.clone(),
                    n: forest.len(),
                    q,
                    p,
                    landmarks: config.landmarks,
                    s_plus_1: m,
                    epsilon: config.threshold,
                    lost_energy: emb.lost_energy,
                    nnz_at: out.at.sparse.nnz(),
                    nnz_nt: out.nt.nnz(),
                    rel_err_at: out.rel_err_at,
                    rel_err_nt: out.rel_err_nt,
                    wall_ms_transform: t.wall_ms_transform,
                };
                io::save_json(
                    a.row(p, q, m),
                    &RowRecord {
                        row,
                        patches: out.per_patch,
                    },
                )?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct NnzPoint {
    q: usize,
    p: usize,
    s_plus_1: usize,
    nnz_at: usize,
    nnz_nt: usize,
}

/// `report`: collects the rows of the sweep into `report.json` and `report.csv`.
pub fn stage_report(config: &PipelineConfig) -> Result<Vec<ReportRow>> {
    let a = Artifacts { dir: &config.out };
    let mut rows = Vec::new();
    for (p, q, m) in config.sweep() {
        let rec: RowRecord = io::load_json(require(a.row(p, q, m), Stage::Compress)?)?;
        rows.push(rec.row);
    }
    io::save_json(a.report_json(), &rows)?;
    let file = std::fs::File::create(a.report_csv()).map_err(|e| Error::io(a.report_csv(), e))?;
    write_report_csv(&rows, std::io::BufWriter::new(file))?;
    let plot: Vec<NnzPoint> = rows
        .iter()
        .map(|r| NnzPoint {
            q: r.q,
            p: r.p,
            s_plus_1: r.s_plus_1,
            nnz_at: r.nnz_at,
            nnz_nt: r.nnz_nt,
        })
        .collect();
    io::save_records(a.nnz_plot(), &plot)?;
    Ok(rows)
}

/// Runs one stage on the configured thread pool.
pub fn run_stage(config: &PipelineConfig, stage: Stage) -> Result<()> {
    config.validate()?;
    config.install(|| match stage {
        Stage::Gen => stage_gen(config),
        Stage::Graph => stage_graph(config),
        Stage::Partition => stage_partition(config),
        Stage::Embed => stage_embed(config),
        Stage::Transform => stage_transform(config),
        Stage::Compress => stage_compress(config),
        Stage::Report => stage_report(config).map(|_| ()),
    })?
}

/// Error raised by a stage, tagged with the stage name.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

/// Every stage in order; returns the report rows.
pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<Vec<ReportRow>, StageError> {
    config.validate().map_err(|source| StageError { stage: "config", source })?;
    let tag = |stage: Stage| move |source| StageError { stage: stage.name(), source };
    let inner = || -> std::result::Result<Vec<ReportRow>, StageError> {
        for stage in &Stage::ALL[..6] {
            let f = match stage {
                Stage::Gen => stage_gen,
                Stage::Graph => stage_graph,
                Stage::Partition => stage_partition,
                Stage::Embed => stage_embed,
                Stage::Transform => stage_transform,
                _ => stage_compress,
            };
            log::info!("running stage {}", stage.name());
            f(config).map_err(tag(*stage))?;
        }
        stage_report(config).map_err(tag(Stage::Report))
    };
    config.install(inner).map_err(|source| StageError { stage: "config", source })?
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::DatasetKind;

    fn micro(dir: &Path) -> PipelineConfig {
        let mut c = PipelineConfig::new(DatasetSpec::new(DatasetKind::UnitSquare, 300), 0.15);
        c.dataset.ambient_d = 5;
        c.patches = vec![1, 2];
        c.moments = vec![1, 3];
        c.landmarks = 20;
        c.out = dir.to_path_buf();
        c
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let json = r#"{"schema_version":1,"dataset":{"kind":"swiss_roll","n":50},"graph_eps":0.2}"#;
        let c: PipelineConfig = serde_json::from_str(json).unwrap();
        assert_eq!((c.patches.clone(), c.dims.clone(), c.landmarks, c.threshold), (vec![1], vec![2], 100, 0.01));
        assert_eq!(c.moments, vec![1, 2, 3, 4, 5]);
        c.validate().unwrap();
        assert_eq!(c.sweep().len(), 5);
        let mut bad = c.clone();
        bad.dims = vec![0];
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.schema_version = 2;
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.threshold = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.landmarks = 2;
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.moments.clear();
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"schema_version":1,"graph_eps":1}"#).is_err());
        let faulty: PipelineConfig = serde_json::from_str(
            r#"{"schema_version":1,"dataset":{"kind":"swiss_roll","n":5},"graph_eps":0.2,"faults":["skip-qr-sign"]}"#,
        )
        .unwrap();
        assert_eq!(faulty.samplet_options(3).unwrap().signs, QrSigns::Reflector);
    }

    #[test]
    fn micro_pipeline_runs() {
        let dir = tempfile::tempdir().unwrap();
        let c = micro(dir.path());
        let rows = run_pipeline(&c).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.rel_err_at <= 0.01 && r.rel_err_nt <= 0.01, "{r:?}");
            assert!(r.nnz_nt <= r.nnz_at);
            assert!(r.wall_ms_transform.is_none());
        }
        let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert!(csv.starts_with("lost_energy,s_plus_1,nnz_at,nnz_nt,rel_err_at,rel_err_nt\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn missing_artifacts_name_their_stage() {
        let dir = tempfile::tempdir().unwrap();
        let c = micro(dir.path());
        match run_stage(&c, Stage::Partition) {
            Err(Error::MissingArtifact { file, stage }) => {
                assert!(file.ends_with("graph.txt"));
                assert_eq!(stage, "graph");
            }
            other => panic!("{other:?}"),
        }
        match run_stage(&c, Stage::Report) {
            Err(Error::MissingArtifact { stage, .. }) => assert_eq!(stage, "compress"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_config_fails_before_compute() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = micro(dir.path());
        c.dims = vec![0];
        let err = run_pipeline(&c).unwrap_err();
        assert_eq!(err.stage, "config");
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }
}
