//! Brute-force oracles and random inputs shared by the integration tests.
#![allow(dead_code)]

use pointpose::{BodyBox, Point3, PointCloud};
use rand::Rng;

fn dist_sq(a: &Point3, b: &Point3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// O(n^2) union-find over all pairs closer than `d_th`; clusters hold
/// ascending indices and are ordered by their smallest member.
pub fn union_find_clusters(points: &[Point3], d_th: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if dist_sq(&points[i], &points[j]) < d_th * d_th {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[r]].push(i);
    }
    clusters
}

/// Full sort of all other rows by (squared distance, index), first `k`.
pub fn brute_knn(features: &[f64], n: usize, d: usize, k: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(n * k);
    for i in 0..n {
        let mut all: Vec<(f64, u32)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let s: f64 = (0..d)
                    .map(|c| {
                        let t = features[i * d + c] - features[j * d + c];
                        t * t
                    })
                    .sum();
                (s, j as u32)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        out.extend(all[..k].iter().map(|e| e.1));
    }
    out
}

/// Points scattered around a few blob centers, so clusters form at most thresholds.
pub fn blob_cloud<R: Rng>(rng: &mut R, n: usize) -> PointCloud {
    let blobs = rng.gen_range(1..6);
    let centers: Vec<Point3> = (0..blobs)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(1.0..3.0)])
        .collect();
    let spread = rng.gen_range(0.02..0.3);
    PointCloud::new(
        (0..n)
            .map(|_| {
                let c = centers[rng.gen_range(0..blobs)];
                [
                    c[0] + rng.gen_range(-spread..spread),
                    c[1] + rng.gen_range(-spread..spread),
                    c[2] + rng.gen_range(-spread..spread),
                ]
            })
            .collect(),
    )
}

pub fn random_box<R: Rng>(rng: &mut R) -> BodyBox {
    BodyBox::new(
        rng.gen_range(0.2..2.0),
        rng.gen_range(0.5..2.2),
        [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..6.0)],
    )
    .unwrap()
}
