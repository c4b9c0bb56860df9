mod common;

use pointpose::eval::{ap, map_score};
use pointpose::graph::knn;
use pointpose::preprocess::{body_box, denormalize_pose, euclidean_cluster_extract, normalize, normalize_pose, resample};
use pointpose::{Point3, PointCloud, Pose, PoseSpace};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn point() -> impl Strategy<Value = Point3> {
    (-2.0f64..2.0, -2.0f64..2.0, 0.5f64..5.0).prop_map(|(x, y, z)| [x, y, z])
}

fn pose(m: usize) -> impl Strategy<Value = Pose> {
    prop::collection::vec(point(), m).prop_map(move |joints| {
        let names = (0..joints.len()).map(|i| format!("j{i}")).collect();
        Pose::new(joints, names, PoseSpace::Camera).unwrap()
    })
}

proptest! {
    #[test]
    fn clustering_matches_union_find(seed in any::<u64>(), n in 1usize..200, d_th in 0.01f64..0.4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = common::blob_cloud(&mut rng, n);
        let got = euclidean_cluster_extract(&cloud, d_th).unwrap();
        prop_assert_eq!(got, common::union_find_clusters(&cloud.points, d_th));
    }

    #[test]
    fn clustering_on_a_lattice_respects_strict_threshold(spacing in 0.05f64..0.2, len in 2usize..12) {
        // Points exactly d_th apart are not neighbors.
        let points: Vec<Point3> = (0..len).map(|i| [i as f64 * spacing, 0.0, 1.0]).collect();
        let cloud = PointCloud::new(points.clone());
        let apart = euclidean_cluster_extract(&cloud, spacing * 0.999).unwrap();
        prop_assert_eq!(apart.len(), len);
        let joined = euclidean_cluster_extract(&cloud, spacing * 1.001).unwrap();
        prop_assert_eq!(joined.len(), 1);
        prop_assert_eq!(joined, common::union_find_clusters(&points, spacing * 1.001));
    }

    #[test]
    fn knn_matches_brute_force(seed in any::<u64>(), n in 2usize..120, d in 1usize..6, k in 1usize..16) {
        prop_assume!(k < n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feats: Vec<f64> = (0..n * d).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let got = knn(&feats, n, d, k).unwrap();
        let want = common::brute_knn(&feats, n, d, k);
        prop_assert_eq!(got.indices(), want.as_slice());
    }

    #[test]
    fn knn_breaks_ties_by_index(n in 3usize..40, k in 1usize..8) {
        prop_assume!(k < n);
        // All points coincide: neighbors are the lowest other indices.
        let feats = vec![0.5f64; n * 3];
        let got = knn(&feats, n, 3, k).unwrap();
        for i in 0..n {
            let want: Vec<u32> = (0..n as u32).filter(|&j| j as usize != i).take(k).collect();
            prop_assert_eq!(got.row(i), want.as_slice());
        }
    }

    #[test]
    fn normalization_round_trip(p in pose(15), seed in any::<u64>()) {
        let b = common::random_box(&mut ChaCha8Rng::seed_from_u64(seed));
        let back = denormalize_pose(&normalize_pose(&p, &b).unwrap(), &b).unwrap();
        for (a, q) in back.joints.iter().zip(&p.joints) {
            for c in 0..3 {
                prop_assert!((a[c] - q[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn body_box_normalizes_cloud_to_unit_extent(points in prop::collection::vec(point(), 2..200)) {
        let cloud = PointCloud::new(points);
        let b = match body_box(&cloud) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        let norm = normalize(&cloud, &b).unwrap();
        for axis in 0..2 {
            let lo = norm.points.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
            let hi = norm.points.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((hi - lo - 1.0).abs() < 1e-9);
        }
        let mean: f64 = norm.points.iter().map(|p| p[2]).sum::<f64>() / norm.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
    }

    #[test]
    fn resample_returns_target_count_of_source_points(
        points in prop::collection::vec(point(), 1..100),
        target in 1usize..300,
        seed in any::<u64>(),
    ) {
        let cloud = PointCloud::new(points);
        let r = resample(&cloud, target, seed).unwrap();
        prop_assert_eq!(r.len(), target);
        for p in &r.points {
            prop_assert!(cloud.points.contains(p));
        }
        prop_assert_eq!(r, resample(&cloud, target, seed).unwrap());
    }

    #[test]
    fn map_is_bounded_and_perfect_on_ground_truth(gt in prop::collection::vec(pose(14), 1..6), shift in 0.0f64..0.3) {
        let report = map_score(&gt, &gt, 0.10).unwrap();
        prop_assert_eq!(report.mean, 100.0);
        let moved: Vec<Pose> = gt
            .iter()
            .map(|p| Pose { joints: p.joints.iter().map(|j| [j[0] + shift, j[1], j[2]]).collect(), ..p.clone() })
            .collect();
        let r = map_score(&moved, &gt, 0.10).unwrap();
        prop_assert!((0.0..=100.0).contains(&r.mean));
        prop_assert_eq!(r.mean, if shift < 0.10 { 100.0 } else { 0.0 });
    }

    #[test]
    fn ap_is_strict(a in point(), offset in 0.0f64..0.2) {
        let b = [a[0], a[1], a[2] + offset];
        prop_assert_eq!(ap(&b, &a, 0.10), u8::from(offset < 0.10));
    }
}
