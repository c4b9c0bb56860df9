//! Synthetic depth-frame datasets, on disk (PGM + joints CSV + manifest) or in memory.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::scene::{render_scene, DepthCamera, RenderConfig, SceneSample};
use super::skeleton::{sample_pose, SkeletonSpec};
use crate::error::{Error, Result};
use crate::io::{write_depth_pgm, write_joints_csv, write_manifest};
use crate::preprocess::{normalize_pose, segment_frame, SegmentConfig};
use crate::train::{Dataset, Sample};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub frames: usize,
    pub spec: SkeletonSpec,
    /// Articulation range, radians.
    pub articulation: f64,
    pub render: RenderConfig,
    pub seed: u64,
}

impl DatasetConfig {
    /// Depth-rendered frames with background wall and noise blobs.
    pub fn new(frames: usize, seed: u64) -> Self {
        Self {
            frames,
            spec: SkeletonSpec::itop(),
            articulation: 0.8,
            render: RenderConfig {
                depth: Some(DepthCamera::default()),
                n_body_points: 256,
                ..RenderConfig::default()
            },
            seed,
        }
    }

    /// Segmentation window that keeps the body and drops the wall.
    pub fn segment_config(&self, target_n: usize) -> SegmentConfig {
        SegmentConfig {
            target_n,
            seed: self.seed,
            ..SegmentConfig::new(0.5, self.render.distance + 1.0)
        }
    }

    pub fn camera(&self) -> DepthCamera {
        self.render.depth.clone().unwrap_or_default()
    }
}

fn frame_seed(base: u64, index: usize, stream: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((index as u64) << 8)
        .wrapping_add(stream)
}

/// Frame `index` of the dataset, always rendered with a depth image.
pub fn generate_frame(cfg: &DatasetConfig, index: usize) -> Result<SceneSample> {
    let skeleton = sample_pose(&cfg.spec, frame_seed(cfg.seed, index, 1), cfg.articulation);
    let render = RenderConfig {
        depth: Some(cfg.camera()),
        seed: frame_seed(cfg.seed, index, 2),
        ..cfg.render.clone()
    };
    render_scene(&skeleton, &cfg.spec, &render)
}

/// Writes `frame_NNNNN.pgm`/`.csv` pairs plus a manifest; returns the manifest path.
pub fn write_dataset(dir: impl AsRef<Path>, cfg: &DatasetConfig) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let entries = (0..cfg.frames)
        .into_par_iter()
        .map(|i| {
            let scene = generate_frame(cfg, i)?;
            let depth = format!("frame_{i:05}.pgm");
            let joints = format!("frame_{i:05}.csv");
            write_depth_pgm(scene.depth.as_ref().expect("depth rendered"), dir.join(&depth))?;
            write_joints_csv(&scene.gt, dir.join(&joints))?;
            Ok((depth, joints))
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = dir.join(MANIFEST_NAME);
    write_manifest(&entries, &manifest)?;
    Ok(manifest)
}

/// Renders, segments and normalizes frames in memory, exactly as the
/// on-disk loader would.
pub fn synthetic_dataset(cfg: &DatasetConfig, seg: &SegmentConfig) -> Result<Dataset> {
    let camera = cfg.camera();
    let samples = (0..cfg.frames)
        .into_par_iter()
        .map(|i| {
            let scene = generate_frame(cfg, i)?;
            let frame_seg = SegmentConfig {
                seed: seg.seed.wrapping_add(i as u64),
                ..seg.clone()
            };
            let s = segment_frame(scene.depth.as_ref().expect("depth rendered"), &camera.intrinsics, &frame_seg)?;
            Ok(Sample {
                target: normalize_pose(&scene.gt, &s.body_box)?,
                cloud: s.cloud,
                body_box: s.body_box,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn written_dataset_loads_like_memory_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = DatasetConfig::new(3, 4);
        let manifest = write_dataset(dir.path(), &cfg).unwrap();
        let seg = cfg.segment_config(64);
        let k = cfg.camera().intrinsics;
        let loaded = Dataset::from_manifest(&manifest, &k, &seg).unwrap();
        let memory = synthetic_dataset(&cfg, &seg).unwrap();
        assert_eq!(loaded.len(), 3);
        for (a, b) in loaded.samples.iter().zip(&memory.samples) {
            assert_eq!(a.cloud, b.cloud);
            for (p, q) in a.target.joints.iter().zip(&b.target.joints) {
                assert!(crate::types::distance(p, q) < 1e-6);
            }
        }
    }
}
