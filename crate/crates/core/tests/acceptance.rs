//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use samplet_graph::compress::compress;
use samplet_graph::datasets::{eval_signal, DatasetKind, DatasetSpec, SignalDomain, SignalSpec};
use samplet_graph::embed::{forest_lost_energy, LandmarkGeodesics};
use samplet_graph::graph::{build_epsilon_graph, euclidean, is_connected, PointCloud, WeightedGraph};
use samplet_graph::linalg::procrustes_rms;
use samplet_graph::partition::{partition_graph, partition_quality, Partition};
use samplet_graph::pipeline::{build_forest, embed_partition, run_pipeline, PipelineConfig};
use samplet_graph::samplets::{decay_report, node_decay, SampletForest, SampletOptions};
use samplet_graph::verify::{verify, Status, VerifyReport};

type Outcome = Result<String, String>;

const DESK_N: usize = 10_000;

/// Desk-scale configuration of each dataset with its graph radius.
fn desk(kind: DatasetKind) -> PipelineConfig {
    let eps = match kind {
        DatasetKind::UnitSquare => 0.04,
        DatasetKind::SwissRoll => 0.05,
        _ => 0.06,
    };
    let mut c = PipelineConfig::new(DatasetSpec::new(kind, DESK_N), eps);
    if kind == DatasetKind::DeformedSphere {
        c.patches = vec![1, 20, 50];
    }
    c
}

const DESK: [DatasetKind; 3] = [DatasetKind::UnitSquare, DatasetKind::SwissRoll, DatasetKind::DeformedSphere];

struct Desk {
    reports: Vec<(DatasetKind, VerifyReport)>,
}

impl Desk {
    fn run() -> Self {
        let reports = DESK
            .iter()
            .map(|&k| (k, verify(&desk(k)).unwrap_or_else(|e| panic!("verify {}: {e}", k.as_str()))))
            .collect();
        Self { reports }
    }

    /// Passes when every named check passed on every dataset; reports the worst value.
    fn judge(&self, checks: &[&str]) -> Outcome {
        let mut lines = Vec::new();
        for name in checks {
            let mut worst = 0.0f64;
            let mut tol = 0.0f64;
            let mut ran = 0;
            for (kind, r) in &self.reports {
                for c in r.named(name) {
                    match c.status {
                        Status::Fail => {
                            return Err(format!(
                                "{name} failed on {} p={} q={} s+1={}: {:?} > {:?} ({})",
                                kind.as_str(),
                                c.p,
                                c.q,
                                c.s_plus_1,
                                c.value,
                                c.tolerance,
                                c.detail
                            ))
                        }
                        Status::Pass => ran += 1,
                        Status::Skipped => {}
                    }
                    worst = worst.max(c.value.unwrap_or(0.0));
                    tol = c.tolerance.unwrap_or(tol);
                }
            }
            if ran == 0 {
                return Err(format!("{name} never ran"));
            }
            if tol > 0.0 {
                lines.push(format!("{name} worst {worst:.2e} <= {tol:.0e} over {ran} configs"));
            } else {
                lines.push(format!("{name} held in {ran} configs"));
            }
        }
        Ok(lines.join("; "))
    }
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Single-patch forest of a dataset at a given moment count.
fn single_patch(spec: &DatasetSpec, eps: f64, q: usize, landmarks: usize) -> (samplet_graph::datasets::Dataset, Partition, Vec<DMatrix<f64>>) {
    let data = spec.generate(0).expect("generate");
    let graph = build_epsilon_graph(&data.cloud, eps).expect("graph").graph;
    let part = partition_graph(&graph, 1, 0).expect("partition");
    let coords = embed_partition(&part, q, landmarks, 0).expect("embed").into_iter().map(|e| e.coords).collect();
    (data, part, coords)
}

fn forest(part: &Partition, coords: &[DMatrix<f64>], s_plus_1: usize) -> SampletForest {
    build_forest(part, coords.to_vec(), &SampletOptions::with_moments(s_plus_1).unwrap()).expect("forest")
}

fn criterion_6() -> Outcome {
    let spec = DatasetSpec::new(DatasetKind::UnitSquare, 100_000);
    let (data, part, coords) = single_patch(&spec, 0.0125, 2, 100);
    let signal = SignalSpec::default_for(DatasetKind::UnitSquare);
    let mut nnz = BTreeMap::new();
    for m in [1, 5] {
        let f = forest(&part, &coords, m);
        let values = eval_signal(&signal, SignalDomain::Ambient { cloud: &data.cloud, center: &data.center }).unwrap();
        let coeffs = f.forward(&values).unwrap().values;
        let out = compress(&f, &values, &coeffs, 1e-2).unwrap();
        if out.rel_err_at > 1e-2 || out.rel_err_nt > 1e-2 {
            return Err(format!("s+1={m}: errors {} {}", out.rel_err_at, out.rel_err_nt));
        }
        nnz.insert(m, (out.at.sparse.nnz(), out.nt.nnz()));
    }
    let (at1, nt1) = nnz[&1];
    let (at5, nt5) = nnz[&5];
    ensure(
        at5 * 20 <= at1 && nt5 * 20 <= nt1,
        format!(
            "AT {at1} -> {at5} ({:.1}x), NT {nt1} -> {nt5} ({:.1}x), required 20x",
            at1 as f64 / at5 as f64,
            nt1 as f64 / nt5 as f64
        ),
    )
}

fn criterion_7() -> Outcome {
    let c = desk(DatasetKind::UnitSquare);
    let data = c.dataset.generate(0).unwrap();
    let graph = build_epsilon_graph(&data.cloud, c.graph_eps).unwrap().graph;
    let part = partition_graph(&graph, 1, 0).unwrap();
    let lost: Vec<f64> = [2, 3, 4]
        .iter()
        .map(|&q| {
            let e = embed_partition(&part, q, 100, 0).unwrap();
            forest_lost_energy(&e.iter().map(|x| x.lost_energy).collect::<Vec<_>>()).unwrap()
        })
        .collect();
    let monotone = lost.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    ensure(
        lost[0] <= 1e-2 && monotone,
        format!("lost energy q=2,3,4: {:.3e} {:.3e} {:.3e}", lost[0], lost[1], lost[2]),
    )
}

fn criterion_8() -> Outcome {
    let side = 20;
    let h = 1.0 / (side - 1) as f64;
    let pts: Vec<Vec<f64>> = (0..side * side).map(|k| vec![(k % side) as f64 * h, (k / side) as f64 * h]).collect();
    let g = build_epsilon_graph(&PointCloud::new(&pts).unwrap(), 3.0 * h).unwrap().graph;
    let e = LandmarkGeodesics::maxmin(&g, 40, 0).unwrap().embed(2).unwrap();
    let truth = DMatrix::from_fn(side * side, 2, |i, j| pts[i][j]);
    let diameter = 2f64.sqrt();
    let rms = procrustes_rms(&e.coords, &truth);

    let two = WeightedGraph::from_edges(2, [(0, 1, 3.0)]).unwrap();
    let y2 = LandmarkGeodesics::maxmin(&two, 2, 0).unwrap().embed(1).unwrap().coords;
    let two_err = ((y2[(0, 0)] - y2[(1, 0)]).abs() - 3.0).abs().max((y2[(0, 0)] + y2[(1, 0)]).abs());

    let line = WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let y3 = LandmarkGeodesics::maxmin(&line, 3, 0).unwrap().embed(1).unwrap().coords;
    let sign = y3[(2, 0)].signum();
    let col_err = [-1.0, 0.0, 1.0].iter().enumerate().fold(0.0f64, |m, (i, t)| m.max((sign * y3[(i, 0)] - t).abs()));
    ensure(
        rms <= 0.02 * diameter && two_err <= 1e-8 && col_err <= 1e-8,
        format!(
            "grid RMS {:.3}% of diameter; two-point err {two_err:.1e}; collinear err {col_err:.1e}",
            100.0 * rms / diameter
        ),
    )
}

fn criterion_9() -> Outcome {
    let spec = DatasetSpec::new(DatasetKind::UnitSquare, DESK_N);
    let (data, part, coords) = single_patch(&spec, 0.04, 2, 100);
    let f = forest(&part, &coords, 2);
    let v0 = (0..data.cloud.len())
        .min_by(|&a, &b| {
            euclidean(data.cloud.point(a), &data.center).total_cmp(&euclidean(data.cloud.point(b), &data.center))
        })
        .unwrap();
    let values = eval_signal(&SignalSpec::RadialPower { gamma: 1.5, v0 }, SignalDomain::Embedded(&f)).unwrap();
    let coeffs = f.forward(&values).unwrap().values;
    let nodes: Vec<_> = node_decay(&f, &coeffs).into_iter().filter(|n| n.count > 0).collect();
    let levels = decay_report(&f, &coeffs);
    for l in &levels {
        let node_max = nodes.iter().filter(|n| n.level == l.level).fold(0.0f64, |m, n| m.max(n.max_abs));
        if node_max != l.max_abs {
            return Err(format!("level {} maximum {} disagrees with node maximum {node_max}", l.level, l.max_abs));
        }
    }
    let depth = levels.last().map(|l| l.level).unwrap_or(0);
    let split = depth / 2;
    let ratio = |n: &samplet_graph::samplets::NodeDecay| n.max_abs / (n.diameter.powf(1.5) * (n.size as f64).sqrt());
    let fitted = nodes.iter().filter(|n| n.level <= split).map(ratio).fold(0.0f64, f64::max);
    let c = 2.0 * fitted;
    let mut violations = BTreeMap::new();
    for n in &nodes {
        if ratio(n) > c {
            *violations.entry(n.level).or_insert(0usize) += 1;
        }
    }
    let fine_worst = nodes.iter().filter(|n| n.level > split).map(ratio).fold(0.0f64, f64::max);
    ensure(
        violations.is_empty() && depth >= 8,
        format!(
            "C = 2 x {fitted:.3e} fitted on levels 0..={split}; worst ratio on levels {}..={depth}: {fine_worst:.3e}; violations {violations:?}",
            split + 1
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut times = Vec::new();
    for n in [10_000usize, 20_000, 40_000] {
        let mut spec = DatasetSpec::new(DatasetKind::UnitSquare, n);
        spec.seed = Some(0);
        let eps = 0.04 * (DESK_N as f64 / n as f64).sqrt();
        let (data, part, coords) = single_patch(&spec, eps, 2, 100);
        let f = forest(&part, &coords, 3);
        let values = eval_signal(
            &SignalSpec::default_for(DatasetKind::UnitSquare),
            SignalDomain::Ambient { cloud: &data.cloud, center: &data.center },
        )
        .unwrap();
        let reps = 10;
        let mut runs: Vec<f64> = (0..5)
            .map(|_| {
                let t = Instant::now();
                for _ in 0..reps {
                    std::hint::black_box(f.forward(std::hint::black_box(&values)).unwrap());
                }
                t.elapsed().as_secs_f64() * 1e3 / reps as f64
            })
            .collect();
        runs.sort_by(f64::total_cmp);
        times.push((n, runs[2]));
    }
    let ratios: Vec<f64> = times.windows(2).map(|w| w[1].1 / w[0].1).collect();
    ensure(
        ratios.iter().all(|&r| r <= 2.5),
        format!(
            "median forward ms {:?}; doubling ratios {:.2} {:.2}",
            times.iter().map(|(n, t)| format!("N={n}: {t:.2}")).collect::<Vec<_>>(),
            ratios[0],
            ratios[1]
        ),
    )
}

fn criterion_11() -> Outcome {
    let base = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for threads in [1usize, 4] {
        let mut c = desk(DatasetKind::UnitSquare);
        c.threads = Some(threads);
        c.out = base.path().join(format!("t{threads}"));
        run_pipeline(&c).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(c.out.join("report.json")).unwrap());
    }
    ensure(
        bytes[0] == bytes[1],
        format!("report.json with 1 and 4 threads: {} bytes, identical = {}", bytes[0].len(), bytes[0] == bytes[1]),
    )
}

fn exhaustive_bisection(g: &WeightedGraph) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut best = f64::INFINITY;
    let mut arg = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n / 2 || mask & 1 == 0 {
            continue;
        }
        let labels: Vec<usize> = (0..n).map(|v| ((mask >> v) & 1 == 0) as usize).collect();
        let cut: f64 = g.edges().filter(|&(u, v, _)| labels[u] != labels[v]).map(|(_, _, w)| 1.0 / w).sum();
        if cut < best {
            best = cut;
            arg = vec![labels];
        } else if cut == best {
            arg.push(labels);
        }
    }
    arg
}

fn criterion_12() -> Outcome {
    let c = desk(DatasetKind::DeformedSphere);
    let data = c.dataset.generate(0).unwrap();
    let graph = build_epsilon_graph(&data.cloud, c.graph_eps).unwrap().graph;
    let mut lines = Vec::new();
    for p in [10, 20] {
        let part = partition_graph(&graph, p, 0).map_err(|e| e.to_string())?;
        let q = partition_quality(&part, &graph);
        let all_connected = part.patches().iter().all(|pa| is_connected(&pa.graph));
        if !all_connected || !q.connected || part.patches().len() != p {
            return Err(format!("p={p}: disconnected patch or wrong patch count"));
        }
        if q.imbalance > 1.3 && part.warnings().is_empty() {
            return Err(format!("p={p}: imbalance {} without a repair warning", q.imbalance));
        }
        lines.push(format!("p={p} imbalance {:.3} warnings {}", q.imbalance, part.warnings().len()));
    }
    let path = WeightedGraph::from_edges(10, (0..9).map(|i| (i, i + 1, 1.0))).unwrap();
    let optimal = exhaustive_bisection(&path);
    for seed in 0..5 {
        let part = partition_graph(&path, 2, seed).unwrap();
        if optimal.len() != 1 || part.labels() != optimal[0].as_slice() {
            return Err(format!("10-vertex path, seed {seed}: {:?} vs oracle {optimal:?}", part.labels()));
        }
    }
    lines.push("10-vertex path matches the exhaustive oracle".into());
    Ok(lines.join("; "))
}

fn main() {
    let start = Instant::now();
    let desk = Desk::run();
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "orthogonality and reconstruction", Box::new(|| desk.judge(&["norm_preservation", "round_trip"]))),
        (2, "vanishing moments", Box::new(|| desk.judge(&["vanishing_moments"]))),
        (3, "polynomial annihilation", Box::new(|| desk.judge(&["polynomial_annihilation"]))),
        (4, "dense-oracle equivalence", Box::new(|| desk.judge(&["dense_oracle", "orthogonality"]))),
        (5, "compression guarantee", Box::new(|| desk.judge(&["compression_at", "compression_nt", "nnz_nt_le_at"]))),
        (6, "vanishing-moment compression gain", Box::new(criterion_6)),
        (7, "lost energy on the noisy square", Box::new(criterion_7)),
        (8, "embedding sanity", Box::new(criterion_8)),
        (9, "decay envelope", Box::new(criterion_9)),
        (10, "linear scaling of the forward transform", Box::new(criterion_10)),
        (11, "determinism across thread counts", Box::new(criterion_11)),
        (12, "partition validity", Box::new(criterion_12)),
    ];
    let mut failed = 0;
    for (id, name, run) in &criteria {
        match run() {
            Ok(msg) => println!("criterion {id:>2} PASS {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id:>2} FAIL {name}: {msg}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
