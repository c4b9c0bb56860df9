//! `key = value` run configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::nn::NetConfig;
use crate::preprocess::{SegmentConfig, DEFAULT_CLUSTER_DISTANCE};
use crate::synth::{EVAL_JOINTS, ITOP_JOINTS};
use crate::train::TrainConfig;
use crate::types::CameraIntrinsics;

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("fx", "focal length x, pixels"),
    ("fy", "focal length y, pixels"),
    ("cx", "principal point x, pixels"),
    ("cy", "principal point y, pixels"),
    ("z_min", "depth window near limit, meters"),
    ("z_max", "depth window far limit, meters"),
    ("d_th", "clustering distance, meters"),
    ("n_points", "points per cloud (resampling target and network input)"),
    ("segment_seed", "resampling seed"),
    ("k_neighbors", "neighbors per point"),
    ("m_joints", "number of joints"),
    ("joints", "comma-separated joint names"),
    ("edgeconv_channels", "EdgeConv filters"),
    ("unit_mlp_channels", "per-unit MLP width"),
    ("fc1", "first head layer width"),
    ("fc2", "second head layer width"),
    ("dynamic_graph", "recompute kNN in feature space (true/false)"),
    ("channel_scale", "divide hidden widths by this factor"),
    ("pool_both_units", "feed both units' pooled features to the head"),
    ("lr", "initial learning rate"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("adam_eps", "Adam epsilon"),
    ("lambda", "L2 regularization strength"),
    ("batch_size", "samples per step"),
    ("epochs", "training epochs"),
    ("lr_drop_epoch", "epoch at which the learning rate drops"),
    ("lr_drop_factor", "learning-rate divisor"),
    ("shuffle_points", "re-permute points every step"),
    ("shuffle_samples", "shuffle sample order every epoch"),
    ("seed", "training seed"),
    ("checkpoint_every", "write an intermediate checkpoint every N epochs (0 = never)"),
    ("val_manifest", "validation manifest for per-epoch mAP"),
    ("threshold", "detection threshold, meters"),
    ("articulation", "synthetic articulation range, radians"),
    ("schema", "synthetic joint schema: itop or eval"),
    ("distance", "synthetic subject distance, meters"),
    ("noise_blobs", "synthetic noise blobs per frame"),
    ("background", "synthetic background wall (true/false)"),
];

pub const INTRINSIC_KEYS: [&str; 4] = ["fx", "fy", "cx", "cy"];
pub const SEGMENT_KEYS: [&str; 6] = ["fx", "fy", "cx", "cy", "z_min", "z_max"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        err(format!("unknown config key `{key}`"))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", i + 1));
            };
            let (k, v) = (k.trim(), v.trim());
            check_key(k).map_err(|e| ConfigError(format!("line {}: {e}", i + 1)))?;
            if v.is_empty() {
                return err(format!("line {}: key `{k}` has no value", i + 1));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return err(format!("line {}: key `{k}` given twice", i + 1));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let Some((k, v)) = assignment.split_once('=') else {
            return err(format!("override `{assignment}` is not `key=value`"));
        };
        let (k, v) = (k.trim(), v.trim());
        check_key(k)?;
        self.values.insert(k.to_string(), v.to_string());
        Ok(())
    }

    pub fn require(&self, keys: &[&str]) -> Result<()> {
        match keys.iter().find(|k| !self.values.contains_key(**k)) {
            Some(k) => err(format!("missing config key `{k}`")),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        self.require(&INTRINSIC_KEYS)?;
        let g = |k| self.get::<f64>(k).map(|v| v.expect("required"));
        CameraIntrinsics::new(g("fx")?, g("fy")?, g("cx")?, g("cy")?).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn segment(&self) -> Result<SegmentConfig> {
        self.require(&SEGMENT_KEYS)?;
        let cfg = SegmentConfig {
            z_min: self.get_or("z_min", 0.0)?,
            z_max: self.get_or("z_max", 0.0)?,
            d_th: self.get_or("d_th", DEFAULT_CLUSTER_DISTANCE)?,
            target_n: self.get_or("n_points", NetConfig::full(1).n_points)?,
            seed: self.get_or("segment_seed", 0)?,
        };
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    pub fn net(&self) -> Result<NetConfig> {
        let m: usize = self.get_or("m_joints", 15)?;
        let full = NetConfig::full(m);
        let cfg = NetConfig {
            n_points: self.get_or("n_points", full.n_points)?,
            k_neighbors: self.get_or("k_neighbors", full.k_neighbors)?,
            m_joints: m,
            edgeconv_channels: self.get_or("edgeconv_channels", full.edgeconv_channels)?,
            unit_mlp_channels: self.get_or("unit_mlp_channels", full.unit_mlp_channels)?,
            fc_sizes: vec![self.get_or("fc1", full.fc_sizes[0])?, self.get_or("fc2", full.fc_sizes[1])?, 3 * m],
            dynamic_graph: self.get_or("dynamic_graph", full.dynamic_graph)?,
            channel_scale: self.get_or("channel_scale", full.channel_scale)?,
            pool_both_units: self.get_or("pool_both_units", full.pool_both_units)?,
        };
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    /// Stage defaults overridden by any training keys present.
    pub fn train(&self, stage: u8) -> Result<TrainConfig> {
        let base = match stage {
            1 => TrainConfig::stage1(),
            2 => TrainConfig::stage2(),
            other => return err(format!("stage must be 1 or 2, got {other}")),
        };
        let cfg = TrainConfig {
            lr: self.get_or("lr", base.lr)?,
            beta1: self.get_or("beta1", base.beta1)?,
            beta2: self.get_or("beta2", base.beta2)?,
            eps: self.get_or("adam_eps", base.eps)?,
            lambda: self.get_or("lambda", base.lambda)?,
            batch_size: self.get_or("batch_size", base.batch_size)?,
            epochs: self.get_or("epochs", base.epochs)?,
            lr_drop_epoch: self.get_or("lr_drop_epoch", base.lr_drop_epoch)?,
            lr_drop_factor: self.get_or("lr_drop_factor", base.lr_drop_factor)?,
            shuffle_points: self.get_or("shuffle_points", base.shuffle_points)?,
            shuffle_samples: self.get_or("shuffle_samples", base.shuffle_samples)?,
            seed: self.get_or("seed", base.seed)?,
            ..base
        };
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    /// Joint names from `joints`, else the built-in schema for `m_joints`.
    pub fn joint_names(&self) -> Result<Vec<String>> {
        let m: usize = self.get_or("m_joints", 15)?;
        let names: Vec<String> = match self.raw("joints") {
            Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
            None if m == ITOP_JOINTS.len() => ITOP_JOINTS.iter().map(|s| s.to_string()).collect(),
            None if m == EVAL_JOINTS.len() => EVAL_JOINTS.iter().map(|s| s.to_string()).collect(),
            None => (0..m).map(|i| format!("joint{i}")).collect(),
        };
        if names.len() != m {
            return err(format!("`joints` lists {} names but m_joints = {m}", names.len()));
        }
        Ok(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let c = RunConfig::parse("# camera\nfx = 280\n\nfy=281 # inline\n").unwrap();
        assert_eq!(c.get::<f64>("fx").unwrap(), Some(280.0));
        assert_eq!(c.get::<f64>("fy").unwrap(), Some(281.0));
        assert_eq!(c.get::<f64>("cx").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert!(RunConfig::parse("focal = 3\n").unwrap_err().0.contains("focal"));
        assert!(RunConfig::parse("fx = 1\nfx = 2\n").is_err());
        assert!(RunConfig::parse("fx 1\n").is_err());
        assert!(RunConfig::parse("fx =\n").is_err());
    }

    #[test]
    fn missing_key_is_named() {
        let c = RunConfig::parse("fx = 1\nfy = 1\ncx = 0\ncy = 0\nz_min = 0.5\n").unwrap();
        assert_eq!(c.segment().unwrap_err().0, "missing config key `z_max`");
    }

    #[test]
    fn overrides_and_typed_errors() {
        let mut c = RunConfig::parse("lr = 0.01\n").unwrap();
        c.set("lr=0.5").unwrap();
        assert_eq!(c.train(1).unwrap().lr, 0.5);
        assert!(c.set("nope=1").is_err());
        c.set("epochs=ten").unwrap();
        assert!(c.train(1).unwrap_err().0.contains("epochs"));
        assert!(c.train(3).is_err());
    }

    #[test]
    fn net_and_joints() {
        let c = RunConfig::parse("n_points = 256\nk_neighbors = 8\nchannel_scale = 8\nm_joints = 14\n").unwrap();
        let n = c.net().unwrap();
        assert_eq!((n.n_points, n.fc_sizes[2]), (256, 42));
        assert_eq!(c.joint_names().unwrap()[1], "chest");
        let bad = RunConfig::parse("m_joints = 2\njoints = a,b,c\n").unwrap();
        assert!(bad.joint_names().is_err());
    }
}
