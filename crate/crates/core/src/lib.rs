//! 3D human pose estimation from single depth images via point clouds.
//!
//! The pipeline back-projects a depth frame, isolates the person by depth
//! window and Euclidean clustering, resamples and normalizes the cloud, and
//! regresses joint positions with an EdgeConv network trained by Adam.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod nn;
pub mod preprocess;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod types;

pub use error::{Error, Result};
pub use types::{BodyBox, CameraIntrinsics, DepthImage, Point3, PointCloud, Pose, PoseSpace};
