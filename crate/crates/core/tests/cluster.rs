mod oracles;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use socialclust::cluster::{
    adjusted_rand_index, detect_elbow, elbow_curve, kmeans, kmeans_best_of, kmeans_rows, restart_seed, wcss,
    ElbowPoint, Init, KMeansConfig,
};
use socialclust::features::{FeatureMatrix, VARIABLES};
use socialclust::matrix::Matrix;
use socialclust::Error;

fn feature_matrix(points: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix {
        student_ids: (0..points.len()).map(|i| format!("s{i:05}")).collect(),
        variables: VARIABLES[..points[0].len()].to_vec(),
        values: Matrix::from_rows(points),
        column_means: vec![0.0; points[0].len()],
        column_sds: vec![1.0; points[0].len()],
    }
}

fn points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..4).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-50.0f64..50.0, d), 6..60))
}

proptest! {
    #[test]
    fn lloyd_invariants(pts in points(), k in 1usize..5, seed in any::<u64>(), first_k in any::<bool>()) {
        let m = Matrix::from_rows(&pts);
        let init = if first_k { Init::FirstKDistinct } else { Init::KMeansPlusPlus };
        let cfg = KMeansConfig { init, max_iterations: 50, ..KMeansConfig::new(k, seed) };
        let r = kmeans_rows(&m, &cfg).unwrap();
        prop_assert!(r.wcss_trace.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.wcss_trace);
        prop_assert_eq!(r.sizes.iter().sum::<usize>(), pts.len());
        prop_assert!(r.sizes.iter().all(|&s| s > 0));
        prop_assert!(r.assignments.iter().all(|&a| a < k));
        prop_assert!(r.iterations_run <= 50);
        prop_assert_eq!(r.wcss_trace.len(), r.iterations_run);
        let recomputed = wcss(&m, &r.assignments, &r.centers).unwrap();
        prop_assert!((recomputed - r.wcss).abs() <= 1e-9 * r.wcss.max(1.0));
        // deterministic for a fixed seed
        prop_assert_eq!(kmeans_rows(&m, &cfg).unwrap(), r);
    }

    #[test]
    fn row_order_does_not_matter(pts in points(), k in 1usize..4, seed in any::<u64>(), rot in 0usize..60) {
        let fm = feature_matrix(&pts);
        let n = pts.len();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let permuted = FeatureMatrix {
            student_ids: order.iter().map(|&i| fm.student_ids[i].clone()).collect(),
            values: fm.values.select_rows(&order),
            ..fm.clone()
        };
        let cfg = KMeansConfig::new(k, seed);
        let a = kmeans(&fm, &cfg).unwrap();
        let b = kmeans(&permuted, &cfg).unwrap();
        prop_assert_eq!(a.wcss, b.wcss);
        for (pos, &i) in order.iter().enumerate() {
            prop_assert_eq!(a.assignments[i], b.assignments[pos]);
        }
    }

    #[test]
    fn ari_is_one_under_relabeling(labels in prop::collection::vec(0usize..4, 2..50), shift in 1usize..4) {
        let relabeled: Vec<usize> = labels.iter().map(|l| (l + shift) % 4).collect();
        prop_assert_eq!(adjusted_rand_index(&labels, &relabeled).unwrap(), 1.0);
        let ari = adjusted_rand_index(&labels, &labels.iter().rev().copied().collect::<Vec<_>>()).unwrap();
        prop_assert!(ari <= 1.0 + 1e-12);
    }
}

#[test]
fn wcss_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let pts: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let assignments: Vec<usize> = (0..50).map(|i| i % 4).collect();
    let centers: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut want = 0.0;
    for (p, &a) in pts.iter().zip(&assignments) {
        for d in 0..3 {
            want += (p[d] - centers[a][d]) * (p[d] - centers[a][d]);
        }
    }
    let got = wcss(&Matrix::from_rows(&pts), &assignments, &Matrix::from_rows(&centers)).unwrap();
    assert!((got - want).abs() < 1e-10 * want);
    assert!(wcss(&Matrix::from_rows(&pts), &assignments[1..], &Matrix::from_rows(&centers)).is_err());
}

#[test]
fn two_blobs_reach_the_global_optimum() {
    let pts = vec![
        vec![0.0, 0.1],
        vec![0.3, -0.2],
        vec![-0.1, 0.0],
        vec![0.2, 0.2],
        vec![5.0, 5.2],
        vec![5.3, 4.9],
        vec![4.8, 5.0],
        vec![5.1, 5.1],
    ];
    let (best, labels) = oracles::exhaustive_min_wcss(&pts, 2);
    let r = kmeans_best_of(&feature_matrix(&pts), &KMeansConfig::new(2, 1), 5).unwrap();
    assert!((r.wcss - best).abs() < 1e-12, "{} vs {best}", r.wcss);
    assert!(oracles::same_partition(&r.assignments, &labels));
    assert!(r.converged);
}

#[test]
fn small_sets_match_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..20 {
        let pts: Vec<Vec<f64>> = (0..7).map(|_| (0..2).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let (best, _) = oracles::exhaustive_min_wcss(&pts, 3);
        let r = kmeans_best_of(&feature_matrix(&pts), &KMeansConfig::new(3, case), 20).unwrap();
        // Lloyd can stop in a local optimum, but never below the global one
        assert!(r.wcss >= best - 1e-9);
        assert!(r.wcss <= 1.5 * best + 1e-9, "case {case}: {} vs optimum {best}", r.wcss);
    }
}

#[test]
fn rejects_impossible_k() {
    let m = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![2.0]]);
    assert!(matches!(kmeans_rows(&m, &KMeansConfig::new(4, 0)), Err(Error::TooManyClusters { .. })));
    assert!(matches!(kmeans_rows(&m, &KMeansConfig::new(3, 0)), Err(Error::NotEnoughDistinct { .. })));
    assert!(kmeans_rows(&m, &KMeansConfig::new(0, 0)).is_err());
}

#[test]
fn first_k_distinct_skips_duplicates() {
    let m = Matrix::from_rows(&[vec![0.0], vec![0.0], vec![10.0], vec![10.5], vec![0.2]]);
    let cfg = KMeansConfig { init: Init::FirstKDistinct, ..KMeansConfig::new(2, 0) };
    let r = kmeans_rows(&m, &cfg).unwrap();
    assert_eq!(r.assignments, vec![0, 0, 1, 1, 0]);
    assert!(r.converged);
}

#[test]
fn restart_seeds_are_distinct() {
    let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| restart_seed(42, i)).collect();
    assert_eq!(seeds.len(), 1000);
    assert_eq!(restart_seed(42, 3), restart_seed(42, 3));
}

#[test]
fn ari_reference_value() {
    let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
    assert!((ari - 4.0 / 7.0).abs() < 1e-15);
    assert!(adjusted_rand_index(&[0, 1], &[0]).is_err());
}

#[test]
fn elbow_on_three_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers = vec![vec![0.0, 0.0, 0.0], vec![12.0, 0.0, 0.0], vec![0.0, 12.0, 0.0]];
    let (pts, _) = oracles::blobs(&centers, 60, 1.0, &mut rng);
    let curve = elbow_curve(&feature_matrix(&pts), &[1, 2, 3, 4, 5, 6], 5, 7, 50).unwrap();
    assert_eq!(curve.suggested_k, Some(3));
    assert!(!curve.ambiguous);
    assert!(curve.points.windows(2).all(|w| w[1].wcss <= w[0].wcss));
    assert!(curve.plot_data().starts_with("# k\twcss\n1\t"));
}

#[test]
fn elbow_on_one_blob_is_ambiguous() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (pts, _) = oracles::blobs(&[vec![0.0, 0.0, 0.0]], 200, 1.0, &mut rng);
    let curve = elbow_curve(&feature_matrix(&pts), &[1, 2, 3, 4, 5, 6, 7, 8], 5, 7, 50).unwrap();
    assert!(curve.ambiguous, "{curve:?}");
}

#[test]
fn elbow_edge_cases() {
    let pts = |w: &[f64]| w.iter().enumerate().map(|(i, &wcss)| ElbowPoint { k: i + 1, wcss }).collect::<Vec<_>>();
    assert_eq!(detect_elbow(&pts(&[10.0, 5.0])), (None, true));
    assert_eq!(detect_elbow(&pts(&[100.0, 50.0, 10.0, 9.0, 8.5])), (Some(3), false));
    // a straight line has no bend
    assert!(detect_elbow(&pts(&[40.0, 30.0, 20.0, 10.0])).1);
}
