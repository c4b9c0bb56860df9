//! Geometric domain types shared by the pipeline stages.
//!
//! Camera coordinates are x right, y down, z forward, in meters. Depth
//! samples are stored in millimeters and converted at back-projection.

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// 16-bit depth image in millimeters; a zero sample marks an invalid pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "depth buffer has {} samples, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn get(&self, u: usize, v: usize) -> u16 {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, depth_mm: u16) {
        self.data[v * self.width + u] = depth_mm;
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Ray through pixel center `(u, v)` scaled so that its z component is 1.
    pub fn ray(&self, u: f64, v: f64) -> Point3 {
        [(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud::new(indices.iter().map(|&i| self.points[i]).collect())
    }

    /// Row-major `n x 3` buffer for the network.
    pub fn to_f32_rows(&self) -> Vec<f32> {
        self.points
            .iter()
            .flat_map(|p| p.iter().map(|&c| c as f32))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseSpace {
    Camera,
    Normalized,
}

/// M named joints.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub joints: Vec<Point3>,
    pub joint_names: Vec<String>,
    pub space: PoseSpace,
}

impl Pose {
    pub fn new(joints: Vec<Point3>, joint_names: Vec<String>, space: PoseSpace) -> Result<Self> {
        if joints.len() != joint_names.len() {
            return Err(Error::JointCount {
                expected: joint_names.len(),
                actual: joints.len(),
            });
        }
        Ok(Self {
            joints,
            joint_names,
            space,
        })
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Flat `[x0, y0, z0, x1, ...]` view.
    pub fn flatten(&self) -> Vec<f64> {
        self.joints.iter().flatten().copied().collect()
    }

    pub fn from_flat(
        values: &[f64],
        joint_names: Vec<String>,
        space: PoseSpace,
    ) -> Result<Self> {
        if values.len() != 3 * joint_names.len() {
            return Err(Error::JointCount {
                expected: joint_names.len(),
                actual: values.len() / 3,
            });
        }
        let joints = values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Pose::new(joints, joint_names, space)
    }
}

/// Normalization box: person width/height and body center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyBox {
    pub width: f64,
    pub height: f64,
    pub center: Point3,
}

impl BodyBox {
    pub fn new(width: f64, height: f64, center: Point3) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::DegenerateBodyBox { width, height });
        }
        Ok(Self {
            width,
            height,
            center,
        })
    }
}

pub(crate) fn distance_sq(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

pub(crate) fn distance(a: &Point3, b: &Point3) -> f64 {
    distance_sq(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_image_rejects_wrong_length() {
        assert!(DepthImage::new(2, 2, vec![0; 3]).is_err());
        assert!(DepthImage::new(2, 2, vec![0; 4]).is_ok());
    }

    #[test]
    fn intrinsics_require_positive_focal() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(1.0, -1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn pose_requires_matching_names() {
        let err = Pose::new(vec![[0.0; 3]], vec![], PoseSpace::Camera).unwrap_err();
        assert!(matches!(err, Error::JointCount { .. }));
    }

    #[test]
    fn body_box_rejects_zero_extent() {
        assert!(BodyBox::new(0.0, 1.0, [0.0; 3]).is_err());
        assert!(BodyBox::new(1.0, 0.0, [0.0; 3]).is_err());
    }
}
