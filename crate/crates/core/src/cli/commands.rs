use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{RunConfig, SEGMENT_KEYS};
use super::CliError;
use crate::error::Error;
use crate::eval::{map_score, DEFAULT_THRESHOLD};
use crate::io::{
    format_joints_csv, load_checkpoint, read_depth_pgm, read_manifest, read_npy, save_checkpoint, write_depth_pgm,
    write_joints_csv, write_manifest, write_ply,
};
use crate::nn::{NetConfig, PoseNet};
use crate::preprocess::{denormalize_pose, segment_frame, SegmentConfig, Segmentation};
use crate::synth::{write_dataset, DatasetConfig, SkeletonSpec, MANIFEST_NAME};
use crate::tensor::ModelParams;
use crate::train::{predict_dataset, train as train_params, Dataset, Stage, TrainHooks};
use crate::types::{CameraIntrinsics, DepthImage, Pose, PoseSpace};

type CmdResult<T = ()> = Result<T, CliError>;

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Fills `m_joints` from the data when the config leaves it out, then
/// builds the network config.
fn net_config(cfg: &RunConfig, m_joints: usize) -> CmdResult<NetConfig> {
    let mut cfg = cfg.clone();
    if cfg.raw("m_joints").is_none() {
        cfg.set(&format!("m_joints={m_joints}"))?;
    }
    Ok(cfg.net()?)
}

fn checkpoint_joints(params: &ModelParams<f32>) -> Option<usize> {
    params
        .entries()
        .iter()
        .rev()
        .find(|e| e.name.starts_with("head.") && e.name.ends_with(".bias"))
        .map(|e| e.tensor.len() / 3)
}

fn load_model(cfg: &RunConfig, ckpt: &Path) -> CmdResult<(PoseNet, ModelParams<f32>)> {
    let raw = load_checkpoint(ckpt)?;
    let m = checkpoint_joints(&raw).unwrap_or(15);
    let net = PoseNet::new(net_config(cfg, m)?)?;
    let params = net.conform(&raw)?;
    Ok((net, params))
}

fn load_dataset(cfg: &RunConfig, manifest: &Path) -> CmdResult<(Dataset, CameraIntrinsics, SegmentConfig)> {
    cfg.require(&SEGMENT_KEYS)?;
    let k = cfg.intrinsics()?;
    let seg = cfg.segment()?;
    let data = Dataset::from_manifest(manifest, &k, &seg)?;
    Ok((data, k, seg))
}

fn dataset_joints(data: &Dataset) -> usize {
    data.joint_names().map_or(0, |n| n.len())
}

pub fn convert(
    depth: &Path,
    joints: &Path,
    out: &Path,
    depth_scale: f64,
    joint_scale: f64,
    flip_y: bool,
    cfg: RunConfig,
) -> CmdResult {
    let d = read_npy(depth)?;
    let j = read_npy(joints)?;
    let (frames, h, w) = match d.shape[..] {
        [h, w] => (1, h, w),
        [n, h, w] => (n, h, w),
        _ => return Err(Error::Shape(format!("depth array has shape {:?}, expected [frames, height, width]", d.shape)).into()),
    };
    let m = match j.shape[..] {
        [m, 3] if frames == 1 => m,
        [n, m, 3] if n == frames => m,
        _ => {
            return Err(Error::Shape(format!(
                "joint array has shape {:?}, expected [{frames}, joints, 3]",
                j.shape
            ))
            .into())
        }
    };
    let mut cfg = cfg;
    if cfg.raw("m_joints").is_none() {
        cfg.set(&format!("m_joints={m}"))?;
    }
    let names = cfg.joint_names()?;
    if names.len() != m {
        return Err(Error::JointCount {
            expected: names.len(),
            actual: m,
        }
        .into());
    }
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let mut entries = Vec::with_capacity(frames);
    for f in 0..frames {
        let pixels = d.data[f * h * w..(f + 1) * h * w]
            .iter()
            .map(|&v| {
                let mm = (v * depth_scale).round();
                if mm.is_finite() && mm > 0.0 {
                    mm.min(u16::MAX as f64) as u16
                } else {
                    0
                }
            })
            .collect();
        let img = DepthImage::new(w, h, pixels)?;
        let joints = j.data[f * m * 3..(f + 1) * m * 3]
            .chunks_exact(3)
            .map(|c| {
                let y = if flip_y { -c[1] } else { c[1] };
                [c[0] * joint_scale, y * joint_scale, c[2] * joint_scale]
            })
            .collect();
        let pose = Pose::new(joints, names.clone(), PoseSpace::Camera)?;
        let depth_name = format!("frame_{f:05}.pgm");
        let joints_name = format!("frame_{f:05}.csv");
        write_depth_pgm(&img, out.join(&depth_name))?;
        write_joints_csv(&pose, out.join(&joints_name))?;
        entries.push((depth_name, joints_name));
    }
    let manifest = out.join(MANIFEST_NAME);
    write_manifest(&entries, &manifest)?;
    println!("wrote {frames} frames ({w}x{h}, {m} joints) to {}", manifest.display());
    Ok(())
}

pub fn segment(depth: &Path, out: &Path, cfg: RunConfig) -> CmdResult {
    cfg.require(&SEGMENT_KEYS)?;
    let k = cfg.intrinsics()?;
    let seg = cfg.segment()?;
    let img = read_depth_pgm(depth)?;
    let s = segment_frame(&img, &k, &seg)?;
    write_ply(&s.cloud, None, out)?;
    let b = &s.body_box;
    println!(
        "body box: width {:.4} height {:.4} center {:.4} {:.4} {:.4}",
        b.width, b.height, b.center[0], b.center[1], b.center[2]
    );
    println!("{} body points (cluster of {}) written to {}", s.cloud.len(), s.body_pixels.len(), out.display());
    Ok(())
}

pub fn synth(out: &Path, frames: usize, seed: u64, cfg: RunConfig) -> CmdResult {
    if frames == 0 {
        return Err(CliError::Usage("--frames must be positive".into()));
    }
    let mut ds = DatasetConfig::new(frames, seed);
    ds.spec = match cfg.raw("schema").unwrap_or("itop") {
        "itop" => SkeletonSpec::itop(),
        "eval" => SkeletonSpec::eval(),
        other => return Err(CliError::Usage(format!("config key `schema`: expected itop or eval, got `{other}`"))),
    };
    ds.articulation = cfg.get_or("articulation", ds.articulation)?;
    ds.render.distance = cfg.get_or("distance", ds.render.distance)?;
    ds.render.noise_blobs = cfg.get_or("noise_blobs", ds.render.noise_blobs)?;
    ds.render.background = cfg.get_or("background", ds.render.background)?;
    let manifest = write_dataset(out, &ds)?;

    let camera = ds.camera();
    let k = &camera.intrinsics;
    let window = ds.segment_config(1);
    let mut text = String::from("# camera and segmentation window for this dataset\n");
    for (key, v) in [
        ("fx", k.fx),
        ("fy", k.fy),
        ("cx", k.cx),
        ("cy", k.cy),
        ("z_min", window.z_min),
        ("z_max", window.z_max),
    ] {
        let _ = writeln!(text, "{key} = {v}");
    }
    let _ = writeln!(text, "m_joints = {}", ds.spec.joints.len());
    let config_path = out.join("pointpose.cfg");
    write_text(&config_path, &text)?;
    println!("wrote {frames} frames to {}", manifest.display());
    println!("camera config: {}", config_path.display());
    Ok(())
}

fn epoch_checkpoint_path(out: &Path, epoch: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.epoch{epoch:04}.{ext}"),
        None => format!("{stem}.epoch{epoch:04}"),
    };
    out.with_file_name(name)
}

pub fn train(manifest: &Path, stage: u8, init: Option<&Path>, out: &Path, log: Option<PathBuf>, cfg: RunConfig) -> CmdResult {
    if stage == 2 && init.is_none() {
        return Err(CliError::Usage("stage 2 requires --init <checkpoint>".into()));
    }
    let mut tcfg = cfg.train(stage)?;
    tcfg.stage = if stage == 1 { Stage::One } else { Stage::Two };
    let every: usize = cfg.get_or("checkpoint_every", 0)?;
    let (data, k, seg) = load_dataset(&cfg, manifest)?;
    let net_cfg = net_config(&cfg, dataset_joints(&data))?;
    let net = PoseNet::new(net_cfg.clone())?;
    let mut params = match init {
        Some(path) => net.conform(&load_checkpoint(path)?)?,
        None => net.init_params(tcfg.seed),
    };
    let validation = match cfg.raw("val_manifest") {
        Some(p) => Some(Dataset::from_manifest(p, &k, &seg)?),
        None => None,
    };

    let log_path = log.unwrap_or_else(|| out.with_extension("log"));
    let mut log_text = format!(
        "# stage {stage}, {} samples, {} points, lr {:e}, batch {}, epochs {}\n",
        data.len(),
        net_cfg.n_points,
        tcfg.lr,
        tcfg.batch_size,
        tcfg.epochs
    );
    let mut hook_error: Option<Error> = None;
    let mut on_epoch = |s: &crate::train::EpochStats, p: &ModelParams<f32>| {
        let mut line = format!("epoch {} loss {:.6} sq_err {:.6} lr {:.3e}", s.epoch + 1, s.loss, s.data_loss, s.lr);
        if let Some(v) = s.val_map {
            let _ = write!(line, " val_map {v:.2}");
        }
        println!("{line}");
        log_text.push_str(&line);
        log_text.push('\n');
        if every > 0 && (s.epoch + 1).is_multiple_of(every) && hook_error.is_none() {
            if let Err(e) = save_checkpoint(p, epoch_checkpoint_path(out, s.epoch + 1)) {
                hook_error = Some(e);
            }
        }
    };
    let history = train_params(
        &data,
        &net_cfg,
        &mut params,
        &tcfg,
        TrainHooks {
            validation: validation.as_ref(),
            on_epoch: Some(&mut on_epoch),
        },
    )?;
    if let Some(e) = hook_error {
        return Err(e.into());
    }
    save_checkpoint(&params, out)?;
    write_text(&log_path, &log_text)?;
    println!("{} steps; checkpoint {}; log {}", history.steps, out.display(), log_path.display());
    Ok(())
}

pub fn eval(manifest: &Path, ckpt: &Path, out: Option<PathBuf>, cfg: RunConfig) -> CmdResult {
    let threshold: f64 = cfg.get_or("threshold", DEFAULT_THRESHOLD)?;
    let (data, _, _) = load_dataset(&cfg, manifest)?;
    let raw = load_checkpoint(ckpt)?;
    let data_joints = dataset_joints(&data);
    let checkpoint = checkpoint_joints(&raw);
    let configured = cfg.get::<usize>("m_joints")?;
    for expected in [checkpoint, configured].into_iter().flatten() {
        if expected != data_joints {
            return Err(Error::JointCount {
                expected,
                actual: data_joints,
            }
            .into());
        }
    }
    let model_joints = checkpoint.unwrap_or(data_joints);
    let net = PoseNet::new(net_config(&cfg, model_joints)?)?;
    let params = net.conform(&raw)?;
    let preds = predict_dataset(&net, &params, &data)?;
    let mut cam_preds = Vec::with_capacity(preds.len());
    let mut cam_gts = Vec::with_capacity(preds.len());
    for (p, s) in preds.iter().zip(&data.samples) {
        cam_preds.push(denormalize_pose(p, &s.body_box)?);
        cam_gts.push(s.camera_target()?);
    }
    let report = map_score(&cam_preds, &cam_gts, threshold)?;
    print!("{report}");
    let csv = out.unwrap_or_else(|| ckpt.with_extension("eval.csv"));
    write_text(&csv, &report.to_csv())?;
    println!("csv: {}", csv.display());
    Ok(())
}

/// Full inference on one frame: segmentation, forward pass, denormalization.
#[derive(Debug, Clone)]
pub struct PredictOutput {
    pub segmentation: Segmentation,
    /// Raw network output.
    pub normalized: Pose,
    pub camera: Pose,
}

pub fn predict_frame(
    img: &DepthImage,
    k: &CameraIntrinsics,
    seg: &SegmentConfig,
    net: &PoseNet,
    params: &ModelParams<f32>,
    joint_names: &[String],
) -> crate::Result<PredictOutput> {
    let segmentation = segment_frame(img, k, seg)?;
    let (normalized, _) = net.predict(params, &segmentation.cloud, joint_names)?;
    let camera = denormalize_pose(&normalized, &segmentation.body_box)?;
    Ok(PredictOutput {
        segmentation,
        normalized,
        camera,
    })
}

pub fn predict(depth: &Path, ckpt: &Path, out: &Path, ply: Option<&Path>, cfg: RunConfig) -> CmdResult<PredictOutput> {
    cfg.require(&SEGMENT_KEYS)?;
    let k = cfg.intrinsics()?;
    let seg = cfg.segment()?;
    let (net, params) = load_model(&cfg, ckpt)?;
    let mut named = cfg.clone();
    if named.raw("m_joints").is_none() {
        named.set(&format!("m_joints={}", net.config().m_joints))?;
    }
    let names = named.joint_names()?;
    let img = read_depth_pgm(depth)?;
    let result = predict_frame(&img, &k, &seg, &net, &params, &names)?;

    let is_ply = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    let csv = if is_ply { out.with_extension("csv") } else { out.to_path_buf() };
    write_text(&csv, &format_joints_csv(&result.camera))?;
    let plys = [is_ply.then_some(out), ply];
    for p in plys.into_iter().flatten() {
        write_ply(&result.segmentation.camera_cloud, Some(&result.camera), p)?;
    }
    println!("{} joints written to {}", result.camera.len(), csv.display());
    Ok(result)
}

pub fn export(manifest: &Path, ckpt: Option<&Path>, out: &Path, cfg: RunConfig) -> CmdResult {
    cfg.require(&SEGMENT_KEYS)?;
    let k = cfg.intrinsics()?;
    let seg = cfg.segment()?;
    let entries = read_manifest(manifest)?;
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let model = match ckpt {
        Some(path) => Some(load_model(&cfg, path)?),
        None => None,
    };
    for (i, entry) in entries.iter().enumerate() {
        let img = read_depth_pgm(&entry.depth)?;
        let gt = crate::io::read_joints_csv(&entry.joints)?;
        let frame_seg = SegmentConfig {
            seed: seg.seed.wrapping_add(i as u64),
            ..seg.clone()
        };
        let stem = format!("frame_{i:05}");
        match &model {
            Some((net, params)) => {
                let r = predict_frame(&img, &k, &frame_seg, net, params, &gt.joint_names)?;
                write_ply(&r.segmentation.camera_cloud, Some(&r.camera), out.join(format!("{stem}.ply")))?;
                write_joints_csv(&r.camera, out.join(format!("{stem}.csv")))?;
            }
            None => {
                let s = segment_frame(&img, &k, &frame_seg)?;
                write_ply(&s.camera_cloud, Some(&gt), out.join(format!("{stem}.ply")))?;
            }
        }
    }
    println!("exported {} frames to {}", entries.len(), out.display());
    Ok(())
}

