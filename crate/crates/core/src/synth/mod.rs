//! Seeded synthetic humans: capsule skeletons, labeled scenes, depth
//! renders and ready-to-load datasets.

mod geom;
pub mod dataset;
pub mod scene;
pub mod skeleton;

pub use dataset::{generate_frame, synthetic_dataset, write_dataset, DatasetConfig, MANIFEST_NAME};
pub use scene::{place_in_camera, render_scene, DepthCamera, Label, RenderConfig, SceneSample};
pub use skeleton::{forward_kinematics, sample_pose, Node, PosedSkeleton, SkeletonSpec, EVAL_JOINTS, ITOP_JOINTS};
