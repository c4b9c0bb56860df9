//! Capsule skeleton, joint-limit table and forward kinematics.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::geom::{add, axis_angle, mat_mul, mat_vec, normalized, scale, Mat3, IDENTITY};
use crate::error::{Error, Result};
use crate::types::{Point3, Pose, PoseSpace};

/// Largest root yaw (radians) regardless of the articulation range.
pub const ROOT_YAW_LIMIT: f64 = 0.6;

/// One skeleton node. Every non-root node ends a bone that starts at its
/// parent and is rendered as a capsule.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub parent: Option<usize>,
    /// Bone direction in the rest (T) pose, body frame: x left, y up, z toward the camera.
    pub direction: Point3,
    pub length: f64,
    pub radius: f64,
    /// Largest rotation (radians) of this bone relative to its parent.
    pub limit: f64,
}

/// Skeleton plus the subset of nodes reported as joints.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSpec {
    pub nodes: Vec<Node>,
    /// Node indices of the reported joints, in output order.
    pub joints: Vec<usize>,
}

/// Joint names of the 15-joint schema.
pub const ITOP_JOINTS: [&str; 15] = [
    "head",
    "neck",
    "r_shoulder",
    "l_shoulder",
    "r_elbow",
    "l_elbow",
    "r_hand",
    "l_hand",
    "torso",
    "r_hip",
    "l_hip",
    "r_knee",
    "l_knee",
    "r_foot",
    "l_foot",
];

/// Joint names of the 14-joint schema (chest replaces neck and torso).
pub const EVAL_JOINTS: [&str; 14] = [
    "head",
    "chest",
    "r_shoulder",
    "l_shoulder",
    "r_elbow",
    "l_elbow",
    "r_hand",
    "l_hand",
    "r_hip",
    "l_hip",
    "r_knee",
    "l_knee",
    "r_foot",
    "l_foot",
];

const UP: Point3 = [0.0, 1.0, 0.0];
const DOWN: Point3 = [0.0, -1.0, 0.0];
const LEFT: Point3 = [1.0, 0.0, 0.0];
const RIGHT: Point3 = [-1.0, 0.0, 0.0];

fn body_nodes(with_chest: bool) -> Vec<Node> {
    // name, parent, direction, length, radius, limit
    #[allow(clippy::type_complexity)]
    let table: [(&str, Option<&str>, Point3, f64, f64, f64); 16] = [
        ("pelvis", None, UP, 0.0, 0.0, 0.0),
        ("torso", Some("pelvis"), UP, 0.20, 0.15, 0.35),
        ("neck", Some("torso"), UP, 0.30, 0.15, 0.25),
        ("head", Some("neck"), UP, 0.20, 0.10, 0.5),
        ("r_shoulder", Some("neck"), RIGHT, 0.18, 0.06, 0.2),
        ("l_shoulder", Some("neck"), LEFT, 0.18, 0.06, 0.2),
        ("r_elbow", Some("r_shoulder"), RIGHT, 0.28, 0.05, 1.4),
        ("l_elbow", Some("l_shoulder"), LEFT, 0.28, 0.05, 1.4),
        ("r_hand", Some("r_elbow"), RIGHT, 0.26, 0.045, 1.4),
        ("l_hand", Some("l_elbow"), LEFT, 0.26, 0.045, 1.4),
        ("r_hip", Some("pelvis"), RIGHT, 0.10, 0.09, 0.1),
        ("l_hip", Some("pelvis"), LEFT, 0.10, 0.09, 0.1),
        ("r_knee", Some("r_hip"), DOWN, 0.42, 0.075, 0.8),
        ("l_knee", Some("l_hip"), DOWN, 0.42, 0.075, 0.8),
        ("r_foot", Some("r_knee"), DOWN, 0.42, 0.055, 0.8),
        ("l_foot", Some("l_knee"), DOWN, 0.42, 0.055, 0.8),
    ];
    let mut nodes: Vec<Node> = Vec::new();
    let index = |nodes: &[Node], name: &str| nodes.iter().position(|n| n.name == name);
    for (name, parent, direction, length, radius, limit) in table {
        let parent = parent.map(|p| index(&nodes, p).expect("parents listed first"));
        nodes.push(Node {
            name: name.to_string(),
            parent,
            direction,
            length,
            radius,
            limit,
        });
    }
    if with_chest {
        nodes.push(Node {
            name: "chest".into(),
            parent: index(&nodes, "torso"),
            direction: UP,
            length: 0.15,
            radius: 0.15,
            limit: 0.0,
        });
    }
    nodes
}

impl SkeletonSpec {
    /// 15-joint schema rooted at a hidden pelvis node.
    pub fn itop() -> Self {
        Self::with_joints(body_nodes(false), &ITOP_JOINTS)
    }

    /// 14-joint schema: head, chest, shoulders, elbows, hands, hips, knees, feet.
    pub fn eval() -> Self {
        Self::with_joints(body_nodes(true), &EVAL_JOINTS)
    }

    fn with_joints(nodes: Vec<Node>, names: &[&str]) -> Self {
        let joints = names
            .iter()
            .map(|j| nodes.iter().position(|n| n.name == *j).expect("joint exists"))
            .collect();
        Self { nodes, joints }
    }

    pub fn validate(&self) -> Result<()> {
        let roots = self.nodes.iter().filter(|n| n.parent.is_none()).count();
        if roots != 1 || self.nodes.first().is_some_and(|n| n.parent.is_some()) {
            return Err(Error::InvalidArgument("skeleton needs exactly one root, listed first".into()));
        }
        for (i, n) in self.nodes.iter().enumerate().skip(1) {
            match n.parent {
                Some(p) if p < i => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "node `{}` must have a parent listed before it",
                        n.name
                    )))
                }
            }
            if !(n.length > 0.0 && n.radius > 0.0 && n.limit >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "bone `{}` needs positive length and radius",
                    n.name
                )));
            }
            if (super::geom::norm(n.direction) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("bone `{}` direction is not unit", n.name)));
            }
        }
        if self.joints.is_empty() || self.joints.iter().any(|&j| j >= self.nodes.len()) {
            return Err(Error::InvalidArgument("joint list must index existing nodes".into()));
        }
        Ok(())
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.joints.iter().map(|&j| self.nodes[j].name.clone()).collect()
    }

    /// `(parent, child)` node pairs, one per bone.
    pub fn bones(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.parent.map(|p| (p, i)))
            .collect()
    }
}

/// Positions of every skeleton node.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedSkeleton {
    pub nodes: Vec<Point3>,
}

impl PosedSkeleton {
    /// Reported joints as a pose tagged with `space`.
    pub fn pose(&self, spec: &SkeletonSpec, space: PoseSpace) -> Pose {
        let joints = spec.joints.iter().map(|&j| self.nodes[j]).collect();
        Pose::new(joints, spec.joint_names(), space).expect("finite positions")
    }

    pub fn map(&self, f: impl Fn(Point3) -> Point3) -> Self {
        Self {
            nodes: self.nodes.iter().map(|&p| f(p)).collect(),
        }
    }
}

/// Forward kinematics with one local rotation per node (root: whole-body rotation).
pub fn forward_kinematics(spec: &SkeletonSpec, local: &[Mat3]) -> PosedSkeleton {
    let mut world: Vec<Mat3> = Vec::with_capacity(spec.nodes.len());
    let mut pos: Vec<Point3> = Vec::with_capacity(spec.nodes.len());
    for (i, n) in spec.nodes.iter().enumerate() {
        match n.parent {
            None => {
                world.push(local[i]);
                pos.push([0.0; 3]);
            }
            Some(p) => {
                let r = mat_mul(&world[p], &local[i]);
                pos.push(add(pos[p], scale(mat_vec(&r, n.direction), n.length)));
                world.push(r);
            }
        }
    }
    PosedSkeleton { nodes: pos }
}

/// Random articulation: each bone turns about a random axis by up to
/// `min(range, limit)` radians, the body yaws by up to `min(range, ROOT_YAW_LIMIT)`.
/// Pelvis at the origin, body frame.
pub fn sample_pose(spec: &SkeletonSpec, seed: u64, range: f64) -> PosedSkeleton {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new_inclusive(-1.0f64, 1.0);
    let frac = Uniform::new_inclusive(0.0f64, 1.0);
    let range = range.max(0.0);
    let local: Vec<Mat3> = spec
        .nodes
        .iter()
        .map(|n| {
            if n.parent.is_none() {
                let yaw = range.min(ROOT_YAW_LIMIT) * unit.sample(&mut rng);
                return axis_angle(UP, yaw);
            }
            let max = range.min(n.limit);
            if max == 0.0 {
                return IDENTITY;
            }
            let axis = loop {
                let v = [unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng)];
                let len2 = super::geom::dot(v, v);
                if len2 > 1e-6 && len2 <= 1.0 {
                    break normalized(v);
                }
            };
            axis_angle(axis, max * frac.sample(&mut rng))
        })
        .collect();
    forward_kinematics(spec, &local)
}
