//! Scene assembly: capsule-surface point sampling, background wall, noise
//! blobs, and an analytic ray-cast depth render.

use std::f64::consts::PI;

use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::geom::{add, normalized, perpendicular_basis, ray_capsule, ray_sphere, scale, segment_distance, sub};
use super::skeleton::{PosedSkeleton, SkeletonSpec};
use crate::error::{Error, Result};
use crate::types::{CameraIntrinsics, DepthImage, Point3, PointCloud, Pose, PoseSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Body,
    Background,
    Noise,
}

/// Pinhole depth camera at the origin looking down +z.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthCamera {
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
}

impl Default for DepthCamera {
    /// 320 x 240 sensor.
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            intrinsics: CameraIntrinsics {
                fx: 280.0,
                fy: 280.0,
                cx: 160.0,
                cy: 120.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    /// Surface samples on the body capsules.
    pub n_body_points: usize,
    pub background: bool,
    /// Gap between the body's farthest surface and the wall, meters.
    pub wall_gap: f64,
    pub noise_blobs: usize,
    pub noise_points: usize,
    pub noise_radius: f64,
    /// Minimum gap between any noise blob surface and the body, meters.
    pub clearance: f64,
    /// Pelvis depth, meters.
    pub distance: f64,
    /// Also ray-cast a depth image.
    pub depth: Option<DepthCamera>,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            n_body_points: 2048,
            background: true,
            wall_gap: 1.2,
            noise_blobs: 3,
            noise_points: 20,
            noise_radius: 0.05,
            clearance: 0.3,
            distance: 3.0,
            depth: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneSample {
    pub cloud: PointCloud,
    pub labels: Vec<Label>,
    /// Joint ground truth in camera coordinates.
    pub gt: Pose,
    pub depth: Option<DepthImage>,
    /// Per-pixel label of the rendered surface (`None` for empty pixels).
    pub pixel_labels: Option<Vec<Option<Label>>>,
}

impl SceneSample {
    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

struct Capsule {
    a: Point3,
    b: Point3,
    r: f64,
}

impl Capsule {
    fn area(&self) -> f64 {
        let len = super::geom::norm(sub(self.b, self.a));
        2.0 * PI * self.r * len + 4.0 * PI * self.r * self.r
    }

    fn surface_distance(&self, p: Point3) -> f64 {
        segment_distance(p, self.a, self.b) - self.r
    }

    fn sample_surface(&self, rng: &mut ChaCha8Rng) -> Point3 {
        let u = Uniform::new(0.0f64, 1.0);
        let axis_vec = sub(self.b, self.a);
        let len = super::geom::norm(axis_vec);
        let cyl = 2.0 * PI * self.r * len;
        let sph = 4.0 * PI * self.r * self.r;
        let axis = if len > 0.0 { normalized(axis_vec) } else { [0.0, 1.0, 0.0] };
        if u.sample(rng) * (cyl + sph) < cyl {
            let (e1, e2) = perpendicular_basis(axis);
            let theta = 2.0 * PI * u.sample(rng);
            let radial = add(scale(e1, theta.cos()), scale(e2, theta.sin()));
            add(add(self.a, scale(axis, len * u.sample(rng))), scale(radial, self.r))
        } else {
            let z = 2.0 * u.sample(rng) - 1.0;
            let phi = 2.0 * PI * u.sample(rng);
            let s = (1.0 - z * z).max(0.0).sqrt();
            let dir = [s * phi.cos(), s * phi.sin(), z];
            let center = if super::geom::dot(dir, axis) < 0.0 { self.a } else { self.b };
            add(center, scale(dir, self.r))
        }
    }
}

/// Body frame (x left, y up, z toward camera) to camera frame (x right in
/// the image, y down, z away) with the pelvis at depth `distance`.
pub fn place_in_camera(skeleton: &PosedSkeleton, distance: f64) -> PosedSkeleton {
    skeleton.map(|p| [p[0], -p[1], distance - p[2]])
}

fn capsules(spec: &SkeletonSpec, cam: &PosedSkeleton) -> Vec<Capsule> {
    spec.bones()
        .into_iter()
        .map(|(p, c)| Capsule {
            a: cam.nodes[p],
            b: cam.nodes[c],
            r: spec.nodes[c].radius,
        })
        .collect()
}

fn body_clearance(caps: &[Capsule], p: Point3) -> f64 {
    caps.iter().map(|c| c.surface_distance(p)).fold(f64::INFINITY, f64::min)
}

/// Builds a labeled scene around a body-frame skeleton.
pub fn render_scene(skeleton: &PosedSkeleton, spec: &SkeletonSpec, cfg: &RenderConfig) -> Result<SceneSample> {
    if cfg.n_body_points == 0 {
        return Err(Error::InvalidArgument("n_body_points must be at least 1".into()));
    }
    if !(cfg.distance > 0.0) || !(cfg.wall_gap >= 1.0) {
        return Err(Error::InvalidArgument("distance must be positive and wall_gap at least 1 m".into()));
    }
    if cfg.noise_blobs > 0 && !(cfg.noise_radius > 0.0 && cfg.clearance >= 0.0) {
        return Err(Error::InvalidArgument("noise blobs need a positive radius".into()));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cam = place_in_camera(skeleton, cfg.distance);
    let caps = capsules(spec, &cam);
    let gt = cam.pose(spec, PoseSpace::Camera);

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let weights = WeightedIndex::new(caps.iter().map(Capsule::area)).expect("capsules have area");
    for _ in 0..cfg.n_body_points {
        points.push(caps[weights.sample(&mut rng)].sample_surface(&mut rng));
        labels.push(Label::Body);
    }

    let far = caps
        .iter()
        .map(|c| c.a[2].max(c.b[2]) + c.r)
        .fold(f64::NEG_INFINITY, f64::max);
    let wall_z = far + cfg.wall_gap;
    if cfg.background {
        let ux = Uniform::new_inclusive(-1.5, 1.5);
        let uy = Uniform::new_inclusive(-1.2, 1.2);
        for _ in 0..cfg.n_body_points.div_ceil(2) {
            points.push([ux.sample(&mut rng), uy.sample(&mut rng), wall_z]);
            labels.push(Label::Background);
        }
    }

    let near = cam.nodes.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
    let mut blobs = Vec::with_capacity(cfg.noise_blobs);
    let bx = Uniform::new_inclusive(-1.2, 1.2);
    let by = Uniform::new_inclusive(-1.0, 1.0);
    let bz = Uniform::new_inclusive((near - 1.0).max(0.6), cfg.distance + 0.4);
    let gap = cfg.clearance + cfg.noise_radius;
    for _ in 0..cfg.noise_blobs {
        let center = (0..10_000).find_map(|_| {
            let c = [bx.sample(&mut rng), by.sample(&mut rng), bz.sample(&mut rng)];
            (body_clearance(&caps, c) > gap && wall_z - c[2] > gap).then_some(c)
        });
        let Some(center) = center else { continue };
        blobs.push(center);
        let u = Uniform::new_inclusive(-1.0f64, 1.0);
        let mut placed = 0;
        while placed < cfg.noise_points {
            let v = [u.sample(&mut rng), u.sample(&mut rng), u.sample(&mut rng)];
            if super::geom::dot(v, v) <= 1.0 {
                points.push(add(center, scale(v, cfg.noise_radius)));
                labels.push(Label::Noise);
                placed += 1;
            }
        }
    }

    let (depth, pixel_labels) = match &cfg.depth {
        Some(camera) => {
            let (img, lab) = ray_cast(camera, &caps, &blobs, cfg.noise_radius, cfg.background.then_some(wall_z));
            (Some(img), Some(lab))
        }
        None => (None, None),
    };

    Ok(SceneSample {
        cloud: PointCloud::new(points),
        labels,
        gt,
        depth,
        pixel_labels,
    })
}

fn ray_cast(
    camera: &DepthCamera,
    caps: &[Capsule],
    blobs: &[Point3],
    blob_radius: f64,
    wall_z: Option<f64>,
) -> (DepthImage, Vec<Option<Label>>) {
    let mut img = DepthImage::zeros(camera.width, camera.height);
    let mut labels = vec![None; camera.width * camera.height];
    for v in 0..camera.height {
        for u in 0..camera.width {
            let ray = camera.intrinsics.ray(u as f64, v as f64);
            let d = normalized(ray);
            let mut best: Option<(f64, Label)> = None;
            let mut consider = |t: Option<f64>, label: Label| {
                if let Some(t) = t {
                    if best.is_none_or(|(b, _)| t < b) {
                        best = Some((t, label));
                    }
                }
            };
            for c in caps {
                consider(ray_capsule([0.0; 3], d, c.a, c.b, c.r), Label::Body);
            }
            for &b in blobs {
                consider(ray_sphere([0.0; 3], d, b, blob_radius), Label::Noise);
            }
            if let Some(z) = wall_z {
                consider(Some(z / d[2]), Label::Background);
            }
            if let Some((t, label)) = best {
                let z_mm = (t * d[2] * 1000.0).round();
                if (1.0..=u16::MAX as f64).contains(&z_mm) {
                    img.set(u, v, z_mm as u16);
                    labels[v * camera.width + u] = Some(label);
                }
            }
        }
    }
    (img, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::skeleton::sample_pose;

    fn scene(cfg: &RenderConfig) -> (SkeletonSpec, PosedSkeleton, SceneSample) {
        let spec = SkeletonSpec::itop();
        let sk = sample_pose(&spec, 3, 1.0);
        let s = render_scene(&sk, &spec, cfg).unwrap();
        (spec, sk, s)
    }

    #[test]
    fn body_only_scene() {
        let cfg = RenderConfig {
            background: false,
            noise_blobs: 0,
            n_body_points: 500,
            ..Default::default()
        };
        let (_, _, s) = scene(&cfg);
        assert_eq!(s.cloud.len(), 500);
        assert!(s.labels.iter().all(|&l| l == Label::Body));
    }

    #[test]
    fn body_points_lie_on_capsules() {
        let (spec, sk, s) = scene(&RenderConfig::default());
        let caps = capsules(&spec, &place_in_camera(&sk, 3.0));
        for (p, l) in s.cloud.points.iter().zip(&s.labels) {
            if *l == Label::Body {
                let d = caps.iter().map(|c| c.surface_distance(*p).abs()).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-9);
            }
        }
    }

    #[test]
    fn distractors_keep_their_distance() {
        let cfg = RenderConfig {
            noise_blobs: 6,
            ..Default::default()
        };
        let (_, _, s) = scene(&cfg);
        assert_eq!(s.count(Label::Noise), 6 * 20);
        let body: Vec<&Point3> = s.cloud.points.iter().zip(&s.labels).filter(|(_, l)| **l == Label::Body).map(|(p, _)| p).collect();
        for (p, l) in s.cloud.points.iter().zip(&s.labels) {
            if *l != Label::Body {
                let d = body.iter().map(|b| crate::types::distance(b, p)).fold(f64::INFINITY, f64::min);
                assert!(d > 0.25, "{l:?} point {d} m from body");
            }
        }
    }

    #[test]
    fn gt_matches_kinematics() {
        let (spec, sk, s) = scene(&RenderConfig::default());
        let cam = place_in_camera(&sk, 3.0);
        for (j, &node) in spec.joints.iter().enumerate() {
            assert_eq!(s.gt.joints[j], cam.nodes[node]);
        }
    }

    #[test]
    fn deterministic() {
        let a = scene(&RenderConfig::default()).2;
        let b = scene(&RenderConfig::default()).2;
        assert_eq!(a.cloud, b.cloud);
    }

    #[test]
    fn depth_render_labels_pixels() {
        let cfg = RenderConfig {
            depth: Some(DepthCamera::default()),
            ..Default::default()
        };
        let (_, _, s) = scene(&cfg);
        let img = s.depth.unwrap();
        let labels = s.pixel_labels.unwrap();
        let body = labels.iter().filter(|l| **l == Some(Label::Body)).count();
        assert!(body > 1000, "{body} body pixels");
        // background everywhere else
        assert!(labels.iter().all(|l| l.is_some()));
        let center = img.get(160, 110);
        assert!(center > 2500 && center < 3500, "{center}");
    }

    #[test]
    fn rejects_bad_config() {
        let spec = SkeletonSpec::itop();
        let sk = sample_pose(&spec, 0, 0.0);
        let cfg = RenderConfig { n_body_points: 0, ..Default::default() };
        assert!(render_scene(&sk, &spec, &cfg).is_err());
        let cfg = RenderConfig { wall_gap: 0.5, ..Default::default() };
        assert!(render_scene(&sk, &spec, &cfg).is_err());
    }
}
