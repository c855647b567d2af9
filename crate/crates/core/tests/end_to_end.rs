use nalgebra::DMatrix;
use proptest::prelude::*;
use samplet_graph::compress::{compress, relative_error};
use samplet_graph::datasets::{DatasetKind, DatasetSpec};
use samplet_graph::graph::{build_epsilon_graph, PointCloud};
use samplet_graph::io;
use samplet_graph::partition::partition_graph;
use samplet_graph::pipeline::{build_forest, embed_partition, run_pipeline, PipelineConfig};
use samplet_graph::samplets::{SampletForest, SampletOptions};

fn random_forest(points: &[(f64, f64)], s_plus_1: usize) -> SampletForest {
    let coords = DMatrix::from_fn(points.len(), 2, |i, j| if j == 0 { points[i].0 } else { points[i].1 });
    let n = points.len();
    SampletForest::build(n, vec![((0..n).collect(), coords)], &SampletOptions::with_moments(s_plus_1).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_is_orthogonal_on_random_clouds(
        points in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..120),
        s_plus_1 in 1usize..5,
        seed in any::<u64>(),
    ) {
        let forest = random_forest(&points, s_plus_1);
        let f: Vec<f64> = (0..points.len()).map(|i| ((i as u64 ^ seed) % 97) as f64 - 48.0).collect();
        let c = forest.forward(&f).unwrap().values;
        let nf = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nc = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((nf - nc).abs() <= 1e-10 * nf.max(1.0));
        let back = forest.inverse(&c).unwrap();
        prop_assert!(relative_error(&f, &back) <= 1e-10 || nf == 0.0);
    }

    #[test]
    fn compression_meets_the_bound(
        points in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..150),
        eps in 0.001f64..0.5,
    ) {
        let forest = random_forest(&points, 3);
        let f: Vec<f64> = points.iter().map(|(x, y)| (7.0 * x).sin() + y * y).collect();
        let c = forest.forward(&f).unwrap().values;
        let out = compress(&forest, &f, &c, eps).unwrap();
        prop_assert!(out.rel_err_at <= eps * (1.0 + 1e-12));
        prop_assert!(out.rel_err_nt <= eps * (1.0 + 1e-12));
        prop_assert!(out.nt.nnz() <= out.at.sparse.nnz());
    }
}

#[test]
fn multi_patch_forest_is_orthogonal() {
    let data = DatasetSpec::new(DatasetKind::SwissRoll, 2000).generate(3).unwrap();
    let graph = build_epsilon_graph(&data.cloud, 0.1).unwrap().graph;
    let part = partition_graph(&graph, 6, 3).unwrap();
    let coords = embed_partition(&part, 2, 40, 3).unwrap().into_iter().map(|e| e.coords).collect();
    let forest = build_forest(&part, coords, &SampletOptions::with_moments(3).unwrap()).unwrap();
    assert_eq!(forest.trees().len(), 6);
    let f: Vec<f64> = (0..forest.len()).map(|v| data.cloud.point(v)[0].cos()).collect();
    let c = forest.forward(&f).unwrap();
    let back = forest.inverse(&c.values).unwrap();
    assert!(relative_error(&f, &back) <= 1e-12);
    for r in 0..6 {
        assert!(c.tags[forest.patch_range(r)].iter().all(|t| t.patch == r));
    }
}

#[test]
fn artifacts_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = PipelineConfig::new(DatasetSpec::new(DatasetKind::DeformedSphere, 600), 0.25);
    c.patches = vec![4];
    c.moments = vec![2];
    c.landmarks = 30;
    c.out = dir.path().to_path_buf();
    let rows = run_pipeline(&c).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].p, 4);
    assert!(rows[0].lost_energy >= 0.0 && rows[0].lost_energy <= 1.0);

    let cloud: PointCloud = io::load_point_cloud(dir.path().join("cloud.csv")).unwrap();
    assert_eq!(cloud.len(), 600);
    io::save_point_cloud(dir.path().join("copy.csv"), &cloud).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("cloud.csv")).unwrap(),
        std::fs::read(dir.path().join("copy.csv")).unwrap()
    );
    let (tags, values) = io::load_coefficients(dir.path().join("coefficients_p4_q2_m2.csv")).unwrap();
    assert_eq!(tags.len(), 600);
    assert_eq!(values.len(), 600);
}
