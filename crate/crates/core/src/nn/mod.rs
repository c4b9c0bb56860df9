//! Point-cloud pose network with hand-written forward and backward passes.

pub mod config;
pub mod gradcheck;
pub mod layers;
pub mod net;

pub use config::NetConfig;
pub use gradcheck::{check_gradients, check_pose_net, relative_error, GradCheckConfig, GradCheckReport};
pub use net::{ForwardTrace, PoseNet, TNET_PREFIX};
