//! Depth image to a segmented, fixed-size, normalized body cloud, and the
//! inverse mapping of network outputs back to camera coordinates.

use std::collections::{HashMap, VecDeque};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{distance_sq, BodyBox, CameraIntrinsics, DepthImage, Point3, PointCloud, Pose, PoseSpace};

pub const DEFAULT_CLUSTER_DISTANCE: f64 = 0.10;
pub const DEFAULT_TARGET_POINTS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    /// Depth window in meters, inclusive on both ends.
    pub z_min: f64,
    pub z_max: f64,
    /// Cluster hop distance in meters (strict).
    pub d_th: f64,
    pub target_n: usize,
    pub seed: u64,
}

impl SegmentConfig {
    pub fn new(z_min: f64, z_max: f64) -> Self {
        Self {
            z_min,
            z_max,
            d_th: DEFAULT_CLUSTER_DISTANCE,
            target_n: DEFAULT_TARGET_POINTS,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.z_min && self.z_min < self.z_max) {
            return Err(Error::InvalidArgument(format!(
                "depth window must satisfy 0 <= z_min < z_max (got {}..{})",
                self.z_min, self.z_max
            )));
        }
        if !(self.d_th > 0.0) {
            return Err(Error::InvalidArgument("d_th must be positive".into()));
        }
        if self.target_n == 0 {
            return Err(Error::InvalidArgument("target_n must be at least 1".into()));
        }
        Ok(())
    }
}

/// Back-projects every valid pixel. Returns the cloud and, per point, the
/// row-major pixel index it came from.
pub fn depth_to_pointcloud_indexed(img: &DepthImage, k: &CameraIntrinsics) -> (PointCloud, Vec<usize>) {
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for v in 0..img.height() {
        for u in 0..img.width() {
            let d = img.get(u, v);
            if d == 0 {
                continue;
            }
            let z = d as f64 / 1000.0;
            points.push([(u as f64 - k.cx) * z / k.fx, (v as f64 - k.cy) * z / k.fy, z]);
            pixels.push(v * img.width() + u);
        }
    }
    (PointCloud::new(points), pixels)
}

pub fn depth_to_pointcloud(img: &DepthImage, k: &CameraIntrinsics) -> PointCloud {
    depth_to_pointcloud_indexed(img, k).0
}

/// Indices of points with `z_min <= z <= z_max`, in input order.
pub fn depth_threshold_indices(cloud: &PointCloud, z_min: f64, z_max: f64) -> Vec<usize> {
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p[2] >= z_min && p[2] <= z_max)
        .map(|(i, _)| i)
        .collect()
}

pub fn depth_threshold(cloud: &PointCloud, z_min: f64, z_max: f64) -> PointCloud {
    cloud.select(&depth_threshold_indices(cloud, z_min, z_max))
}

/// Connected components under the relation "distance < d_th".
///
/// Each cluster's indices are ascending and clusters are ordered by their
/// smallest index. Neighbor candidates come from a uniform grid with cells
/// slightly larger than `d_th`, so only the 27 surrounding cells are probed.
pub fn euclidean_cluster_extract(cloud: &PointCloud, d_th: f64) -> Result<Vec<Vec<usize>>> {
    if cloud.is_empty() {
        return Err(Error::Empty("cloud for clustering"));
    }
    if !(d_th > 0.0) {
        return Err(Error::InvalidArgument("d_th must be positive".into()));
    }
    let grid = VoxelGrid::build(&cloud.points, d_th * (1.0 + 1e-9));
    let limit = d_th * d_th;
    let mut visited = vec![false; cloud.len()];
    let mut clusters = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..cloud.len() {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        let mut members = Vec::new();
        while let Some(q) = queue.pop_front() {
            members.push(q);
            let pq = &cloud.points[q];
            grid.for_each_candidate(pq, |c| {
                if !visited[c] && distance_sq(pq, &cloud.points[c]) < limit {
                    visited[c] = true;
                    queue.push_back(c);
                }
            });
        }
        members.sort_unstable();
        clusters.push(members);
    }
    Ok(clusters)
}

struct VoxelGrid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl VoxelGrid {
    fn build(points: &[Point3], cell: f64) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, cells }
    }

    fn key(p: &Point3, cell: f64) -> [i64; 3] {
        [
            (p[0] / cell).floor() as i64,
            (p[1] / cell).floor() as i64,
            (p[2] / cell).floor() as i64,
        ]
    }

    fn for_each_candidate(&self, p: &Point3, mut f: impl FnMut(usize)) {
        let [x, y, z] = Self::key(p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.cells.get(&[x + dx, y + dy, z + dz]) {
                        bucket.iter().copied().for_each(&mut f);
                    }
                }
            }
        }
    }
}

/// Index of the largest cluster; ties go to the cluster with the smallest
/// member index.
pub fn largest_cluster_index(clusters: &[Vec<usize>]) -> Result<usize> {
    clusters
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty())
        .max_by(|(_, a), (_, b)| {
            a.len()
                .cmp(&b.len())
                .then_with(|| b.iter().min().cmp(&a.iter().min()))
        })
        .map(|(i, _)| i)
        .ok_or(Error::Empty("cluster list"))
}

pub fn largest_cluster(clusters: &[Vec<usize>], cloud: &PointCloud) -> Result<PointCloud> {
    let idx = largest_cluster_index(clusters)?;
    Ok(cloud.select(&clusters[idx]))
}

/// Indices into a cloud of size `len` selecting exactly `target_n` points:
/// a uniform sample without replacement when there are enough points,
/// otherwise every point followed by uniformly drawn duplicates.
pub fn resample_indices(len: usize, target_n: usize, seed: u64) -> Result<Vec<usize>> {
    if len == 0 {
        return Err(Error::Empty("cloud for resampling"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if len >= target_n {
        Ok(index::sample(&mut rng, len, target_n).into_vec())
    } else {
        let mut out: Vec<usize> = (0..len).collect();
        out.extend((len..target_n).map(|_| rng.gen_range(0..len)));
        Ok(out)
    }
}

pub fn resample(cloud: &PointCloud, target_n: usize, seed: u64) -> Result<PointCloud> {
    Ok(cloud.select(&resample_indices(cloud.len(), target_n, seed)?))
}

/// Centroid and axis-aligned x/y extents of the body cloud.
pub fn body_box(cloud: &PointCloud) -> Result<BodyBox> {
    if cloud.len() < 2 {
        return Err(Error::DegenerateBodyBox {
            width: 0.0,
            height: 0.0,
        });
    }
    let mut sum = [0.0f64; 3];
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &cloud.points {
        for a in 0..3 {
            sum[a] += p[a];
        }
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let n = cloud.len() as f64;
    BodyBox::new(hi[0] - lo[0], hi[1] - lo[1], [sum[0] / n, sum[1] / n, sum[2] / n])
}

fn normalize_point(p: &Point3, b: &BodyBox) -> Point3 {
    [
        (p[0] - b.center[0]) / b.width,
        (p[1] - b.center[1]) / b.height,
        p[2] - b.center[2],
    ]
}

fn denormalize_point(p: &Point3, b: &BodyBox) -> Point3 {
    [
        p[0] * b.width + b.center[0],
        p[1] * b.height + b.center[1],
        p[2] + b.center[2],
    ]
}

fn check_box(b: &BodyBox) -> Result<()> {
    if !(b.width > 0.0 && b.height > 0.0) {
        return Err(Error::DegenerateBodyBox {
            width: b.width,
            height: b.height,
        });
    }
    Ok(())
}

/// `(p - b_c) * diag(1/b_w, 1/b_h, 1)`: z is centered but not scaled.
pub fn normalize(cloud: &PointCloud, b: &BodyBox) -> Result<PointCloud> {
    check_box(b)?;
    Ok(PointCloud::new(cloud.points.iter().map(|p| normalize_point(p, b)).collect()))
}

pub fn normalize_pose(pose: &Pose, b: &BodyBox) -> Result<Pose> {
    check_box(b)?;
    Ok(Pose {
        joints: pose.joints.iter().map(|p| normalize_point(p, b)).collect(),
        joint_names: pose.joint_names.clone(),
        space: PoseSpace::Normalized,
    })
}

/// Inverse of [`normalize_pose`]: `j * diag(b_w, b_h, 1) + b_c`.
pub fn denormalize_pose(pose: &Pose, b: &BodyBox) -> Result<Pose> {
    if pose.space != PoseSpace::Normalized {
        return Err(Error::InvalidArgument("pose is not in normalized space".into()));
    }
    Ok(Pose {
        joints: pose.joints.iter().map(|p| denormalize_point(p, b)).collect(),
        joint_names: pose.joint_names.clone(),
        space: PoseSpace::Camera,
    })
}

pub fn denormalize_cloud(cloud: &PointCloud, b: &BodyBox) -> PointCloud {
    PointCloud::new(cloud.points.iter().map(|p| denormalize_point(p, b)).collect())
}

/// Everything the segmentation pipeline produces for one frame.
#[derive(Debug, Clone)]
pub struct Segmentation {
    /// Resampled, normalized body cloud (network input).
    pub cloud: PointCloud,
    pub body_box: BodyBox,
    /// The same resampled points in camera coordinates.
    pub camera_cloud: PointCloud,
    /// Row-major pixel index of every resampled point.
    pub source_pixels: Vec<usize>,
    /// Pixels of the full body cluster before resampling.
    pub body_pixels: Vec<usize>,
}

/// Back-projection, depth window, clustering, largest cluster, resampling,
/// body box and normalization, in that order.
pub fn segment_frame(img: &DepthImage, k: &CameraIntrinsics, cfg: &SegmentConfig) -> Result<Segmentation> {
    cfg.validate()?;
    let (cloud, pixels) = depth_to_pointcloud_indexed(img, k);
    let window = depth_threshold_indices(&cloud, cfg.z_min, cfg.z_max);
    if window.is_empty() {
        return Err(Error::NoPersonFound);
    }
    let windowed = cloud.select(&window);
    let clusters = euclidean_cluster_extract(&windowed, cfg.d_th)?;
    let body = &clusters[largest_cluster_index(&clusters)?];
    let body_pixels: Vec<usize> = body.iter().map(|&i| pixels[window[i]]).collect();
    let body_cloud = windowed.select(body);
    let picks = resample_indices(body_cloud.len(), cfg.target_n, cfg.seed)?;
    let camera_cloud = body_cloud.select(&picks);
    let source_pixels = picks.iter().map(|&i| body_pixels[i]).collect();
    let body_box = body_box(&camera_cloud)?;
    let cloud = normalize(&camera_cloud, &body_box)?;
    Ok(Segmentation {
        cloud,
        body_box,
        camera_cloud,
        source_pixels,
        body_pixels,
    })
}

pub fn segment_pipeline(img: &DepthImage, k: &CameraIntrinsics, cfg: &SegmentConfig) -> Result<(PointCloud, BodyBox)> {
    segment_frame(img, k, cfg).map(|s| (s.cloud, s.body_box))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn principal_point_pixel_lies_on_axis() {
        let mut img = DepthImage::zeros(5, 3);
        img.set(2, 1, 2000);
        assert_eq!(depth_to_pointcloud(&img, &k()).points, vec![[0.0, 0.0, 2.0]]);
    }

    #[test]
    fn pixel_one_focal_length_right() {
        let intr = CameraIntrinsics::new(2.0, 2.0, 1.0, 0.0).unwrap();
        let mut img = DepthImage::zeros(4, 1);
        img.set(3, 0, 2000);
        assert_eq!(depth_to_pointcloud(&img, &intr).points, vec![[2.0, 0.0, 2.0]]);
    }

    #[test]
    fn zero_image_gives_empty_cloud() {
        assert!(depth_to_pointcloud(&DepthImage::zeros(8, 8), &k()).is_empty());
    }

    #[test]
    fn threshold_keeps_window() {
        let c = PointCloud::new(vec![[0.0, 0.0, 0.5], [0.0, 0.0, 2.0], [0.0, 0.0, 9.0]]);
        assert_eq!(depth_threshold(&c, 1.0, 4.0).points, vec![[0.0, 0.0, 2.0]]);
        assert_eq!(depth_threshold(&c, 0.0, 10.0), c);
    }

    #[test]
    fn chaining_merges_collinear_points() {
        let c = PointCloud::new(vec![[0.0, 0.0, 0.0], [0.09, 0.0, 0.0], [0.18, 0.0, 0.0]]);
        assert_eq!(euclidean_cluster_extract(&c, 0.10).unwrap(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn far_points_stay_apart() {
        let c = PointCloud::new(vec![[0.0, 0.0, 0.0], [0.15, 0.0, 0.0]]);
        assert_eq!(euclidean_cluster_extract(&c, 0.10).unwrap(), vec![vec![0], vec![1]]);
    }

    #[test]
    fn boundary_distance_is_not_connected() {
        let c = PointCloud::new(vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]);
        assert_eq!(euclidean_cluster_extract(&c, 0.5).unwrap().len(), 2);
    }

    #[test]
    fn clustering_empty_cloud_errors() {
        assert!(euclidean_cluster_extract(&PointCloud::default(), 0.1).is_err());
    }

    #[test]
    fn largest_cluster_rules() {
        let sizes = vec![vec![0, 1, 2], vec![3, 4, 5, 6, 7, 8, 9], vec![10, 11]];
        assert_eq!(largest_cluster_index(&sizes).unwrap(), 1);
        assert_eq!(largest_cluster_index(&[vec![4, 5]]).unwrap(), 0);
        let tie = vec![vec![4, 5, 6, 7], vec![0, 1, 2, 3]];
        assert_eq!(largest_cluster_index(&tie).unwrap(), 1);
        assert!(largest_cluster_index(&[]).is_err());
    }

    #[test]
    fn resample_down_and_up() {
        let big = PointCloud::new((0..7000).map(|i| [i as f64, 0.0, 0.0]).collect());
        let down = resample(&big, 5000, 1).unwrap();
        assert_eq!(down.len(), 5000);
        let mut seen: Vec<usize> = down.points.iter().map(|p| p[0] as usize).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 5000, "sampling is without replacement");

        let small = PointCloud::new((0..3000).map(|i| [i as f64, 0.0, 0.0]).collect());
        let up = resample(&small, 5000, 1).unwrap();
        let mut distinct: Vec<usize> = up.points.iter().map(|p| p[0] as usize).collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(up.len(), 5000);
        assert_eq!(distinct.len(), 3000);

        assert_eq!(resample(&big, 5000, 9).unwrap(), resample(&big, 5000, 9).unwrap());
        assert!(resample(&PointCloud::default(), 5, 0).is_err());
    }

    #[test]
    fn body_box_direct() {
        let c = PointCloud::new(vec![[0.0, 0.0, 1.0], [1.0, 2.0, 3.0]]);
        let b = body_box(&c).unwrap();
        assert_eq!(b.center, [0.5, 1.0, 2.0]);
        assert_eq!((b.width, b.height), (1.0, 2.0));
    }

    #[test]
    fn body_box_degenerate() {
        let c = PointCloud::new(vec![[0.0, 0.0, 1.0], [0.0, 2.0, 3.0]]);
        assert!(matches!(body_box(&c), Err(Error::DegenerateBodyBox { .. })));
        assert!(body_box(&PointCloud::new(vec![[1.0; 3]])).is_err());
    }

    #[test]
    fn normalize_direct() {
        let b = BodyBox::new(0.5, 2.0, [1.0, 1.0, 2.0]).unwrap();
        let c = PointCloud::new(vec![[1.5, 3.0, 2.5], [1.0, 1.0, 2.0]]);
        let n = normalize(&c, &b).unwrap();
        assert_eq!(n.points, vec![[1.0, 1.0, 0.5], [0.0, 0.0, 0.0]]);
    }

    #[test]
    fn denormalize_direct() {
        let b = BodyBox::new(0.5, 2.0, [1.0, 1.0, 2.0]).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let p = Pose::new(vec![[0.0; 3], [1.0, 1.0, 0.5]], names, PoseSpace::Normalized).unwrap();
        let d = denormalize_pose(&p, &b).unwrap();
        assert_eq!(d.joints, vec![[1.0, 1.0, 2.0], [1.5, 3.0, 2.5]]);
        assert_eq!(d.space, PoseSpace::Camera);
        assert!(denormalize_pose(&d, &b).is_err());
    }

    #[test]
    fn zero_box_is_rejected_by_normalize() {
        let b = BodyBox {
            width: 0.0,
            height: 1.0,
            center: [0.0; 3],
        };
        assert!(normalize(&PointCloud::new(vec![[0.0; 3]]), &b).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SegmentConfig::new(1.0, 4.0).validate().is_ok());
        assert!(SegmentConfig::new(4.0, 1.0).validate().is_err());
        assert!(SegmentConfig::new(-1.0, 1.0).validate().is_err());
        let mut c = SegmentConfig::new(0.0, 1.0);
        c.d_th = 0.0;
        assert!(c.validate().is_err());
    }
}
