//! Squared-error objective with L2 regularization, Adam, and the two-stage
//! training schedule (full network, then everything but the T-Net).

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{map_score, DEFAULT_THRESHOLD};
use crate::io::{read_depth_pgm, read_joints_csv, read_manifest};
use crate::nn::{NetConfig, PoseNet, TNET_PREFIX};
use crate::preprocess::{denormalize_pose, normalize_pose, segment_frame, SegmentConfig};
use crate::tensor::{Gradients, ModelParams, Scalar};
use crate::types::{BodyBox, CameraIntrinsics, PointCloud, Pose, PoseSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// All parameters, points re-permuted every step.
    One,
    /// T-Net frozen, fixed point order.
    Two,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub stage: Stage,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epoch (0-based) from which the learning rate is divided by `lr_drop_factor`.
    pub lr_drop_epoch: usize,
    pub lr_drop_factor: f64,
    pub shuffle_points: bool,
    pub shuffle_samples: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn stage1() -> Self {
        Self {
            stage: Stage::One,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lambda: 5e-4,
            batch_size: 4,
            epochs: 80,
            lr_drop_epoch: 50,
            lr_drop_factor: 10.0,
            shuffle_points: true,
            shuffle_samples: true,
            seed: 0,
        }
    }

    pub fn stage2() -> Self {
        Self {
            stage: Stage::Two,
            lr: 1e-5,
            epochs: 40,
            shuffle_points: false,
            ..Self::stage1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr_drop_factor > 0.0) {
            return bad("lr_drop_factor must be positive");
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch >= self.lr_drop_epoch {
            self.lr / self.lr_drop_factor
        } else {
            self.lr
        }
    }
}

/// Adam moment buffers aligned with a [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new<F: Scalar>(params: &ModelParams<F>) -> Self {
        let zeros: Vec<Vec<f64>> = params.entries().iter().map(|e| vec![0.0; e.tensor.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of every trainable tensor.
pub fn adam_step<F: Scalar>(
    params: &mut ModelParams<F>,
    grads: &Gradients<F>,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    let shapes_match = grads.len() == params.len()
        && state.m.len() == params.len()
        && params
            .entries()
            .iter()
            .enumerate()
            .all(|(i, e)| grads.get(i).len() == e.tensor.len() && state.m[i].len() == e.tensor.len());
    if !shapes_match {
        return Err(Error::Shape("optimizer state or gradients do not match parameters".into()));
    }
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    for (i, e) in params.entries_mut().iter_mut().enumerate() {
        if !e.trainable {
            continue;
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, w) in e.tensor.values_mut().iter_mut().enumerate() {
            let g = grads.get(i)[j].as_f64();
            m[j] = beta1 * m[j] + (1.0 - beta1) * g;
            v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
            let step = lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
            *w = F::from_f64(w.as_f64() - step);
        }
    }
    Ok(())
}

/// Per-sample objective `||gt - pred||^2 + lambda * ||w||^2` over trainable
/// tensors, with its gradient with respect to `pred`.
pub fn loss<F: Scalar>(pred: &Pose, gt: &Pose, params: &ModelParams<F>, lambda: f64) -> Result<(f64, Vec<f64>)> {
    if pred.len() != gt.len() {
        return Err(Error::JointCount {
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    if pred.space != PoseSpace::Normalized || gt.space != PoseSpace::Normalized {
        return Err(Error::InvalidArgument("loss expects normalized poses".into()));
    }
    let (data, grad) = squared_error(&pred.flatten(), &gt.flatten());
    Ok((data + lambda * params.trainable_sq_norm(), grad))
}

fn squared_error(pred: &[f64], gt: &[f64]) -> (f64, Vec<f64>) {
    let mut sum = 0.0;
    let grad = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let d = p - g;
            sum += d * d;
            2.0 * d
        })
        .collect();
    (sum, grad)
}

/// A normalized training cloud with its normalized target pose.
#[derive(Debug, Clone)]
pub struct Sample {
    pub cloud: PointCloud,
    pub target: Pose,
    pub body_box: BodyBox,
}

impl Sample {
    /// Ground truth back in camera coordinates.
    pub fn camera_target(&self) -> Result<Pose> {
        denormalize_pose(&self.target, &self.body_box)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let names = &first.target.joint_names;
            let n = first.cloud.len();
            if samples.iter().any(|s| &s.target.joint_names != names || s.cloud.len() != n) {
                return Err(Error::Shape("samples differ in joint schema or point count".into()));
            }
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn joint_names(&self) -> Option<&[String]> {
        self.samples.first().map(|s| s.target.joint_names.as_slice())
    }

    /// Segments every manifest frame; the frame's index is added to the
    /// resampling seed so each frame draws independently.
    pub fn from_manifest(path: impl AsRef<Path>, intrinsics: &CameraIntrinsics, seg: &SegmentConfig) -> Result<Self> {
        let entries = read_manifest(path)?;
        let samples = entries
            .par_iter()
            .enumerate()
            .map(|(i, e)| {
                let img = read_depth_pgm(&e.depth)?;
                let gt = read_joints_csv(&e.joints)?;
                let cfg = SegmentConfig {
                    seed: seg.seed.wrapping_add(i as u64),
                    ..seg.clone()
                };
                let s = segment_frame(&img, intrinsics, &cfg)?;
                Ok(Sample {
                    target: normalize_pose(&gt, &s.body_box)?,
                    cloud: s.cloud,
                    body_box: s.body_box,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-sample objective including the regularizer.
    pub loss: f64,
    /// Mean per-sample squared error.
    pub data_loss: f64,
    pub lr: f64,
    pub steps: usize,
    pub val_map: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub steps: usize,
}

pub type EpochHook<'a> = dyn FnMut(&EpochStats, &ModelParams<f32>) + 'a;

/// Optional extras for a training run.
#[derive(Default)]
pub struct TrainHooks<'a> {
    /// Evaluated (mAP@10cm in camera space) after every epoch.
    pub validation: Option<&'a Dataset>,
    /// Called after every epoch, e.g. for logging or checkpoints.
    pub on_epoch: Option<&'a mut EpochHook<'a>>,
}

fn net_for(data: &Dataset, net_cfg: &NetConfig) -> Result<PoseNet> {
    let first = data.samples.first().ok_or(Error::Empty("training dataset"))?;
    if first.cloud.len() != net_cfg.n_points {
        return Err(Error::Shape(format!(
            "dataset clouds have {} points, network expects {}",
            first.cloud.len(),
            net_cfg.n_points
        )));
    }
    if first.target.len() != net_cfg.m_joints {
        return Err(Error::JointCount {
            expected: net_cfg.m_joints,
            actual: first.target.len(),
        });
    }
    PoseNet::new(net_cfg.clone())
}

fn permuted_rows(cloud: &PointCloud, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.shuffle(rng);
    cloud.select(&order).to_f32_rows()
}

/// Trains `params` in place under `cfg`; stage two freezes the T-Net first.
pub fn train(
    data: &Dataset,
    net_cfg: &NetConfig,
    params: &mut ModelParams<f32>,
    cfg: &TrainConfig,
    hooks: TrainHooks<'_>,
) -> Result<TrainHistory> {
    cfg.validate()?;
    let net = net_for(data, net_cfg)?;
    *params = net.conform(params)?;
    if cfg.stage == Stage::Two {
        params.freeze_prefix(TNET_PREFIX);
    }
    let TrainHooks {
        validation,
        mut on_epoch,
    } = hooks;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(params);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let fixed_rows: Vec<Vec<f32>> = if cfg.shuffle_points {
        Vec::new()
    } else {
        data.samples.iter().map(|s| s.cloud.to_f32_rows()).collect()
    };

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        if cfg.shuffle_samples {
            order.shuffle(&mut rng);
        }
        let (mut loss_sum, mut data_sum, mut steps) = (0.0, 0.0, 0);
        for batch in order.chunks(cfg.batch_size) {
            let inputs: Vec<Vec<f32>> = batch
                .iter()
                .map(|&i| {
                    if cfg.shuffle_points {
                        permuted_rows(&data.samples[i].cloud, &mut rng)
                    } else {
                        fixed_rows[i].clone()
                    }
                })
                .collect();
            let reg = cfg.lambda * params.trainable_sq_norm();
            let scale = 1.0 / batch.len() as f64;
            let per_sample = batch
                .par_iter()
                .zip(inputs.par_iter())
                .map(|(&i, x)| {
                    let trace = net.forward(params, x)?;
                    let pred: Vec<f64> = trace.output().iter().map(|&v| v as f64).collect();
                    let (err, dpred) = squared_error(&pred, &data.samples[i].target.flatten());
                    let upstream: Vec<f32> = dpred.iter().map(|&g| (g * scale) as f32).collect();
                    let mut grads = Gradients::zeros_like(params);
                    net.backward(params, &trace, &upstream, &mut grads)?;
                    Ok((err, grads))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grads = Gradients::zeros_like(params);
            for (err, g) in &per_sample {
                grads.add_assign(g);
                data_sum += err;
                loss_sum += err + reg;
            }
            add_l2_grad(params, &mut grads, cfg.lambda);
            adam_step(params, &grads, &mut adam, lr, cfg.beta1, cfg.beta2, cfg.eps)?;
            steps += 1;
        }
        history.steps += steps;
        let val_map = match validation {
            Some(v) if !v.is_empty() => Some(validation_map(&net, params, v)?),
            _ => None,
        };
        let stats = EpochStats {
            epoch,
            loss: loss_sum / data.len() as f64,
            data_loss: data_sum / data.len() as f64,
            lr,
            steps,
            val_map,
        };
        if let Some(cb) = on_epoch.as_mut() {
            cb(&stats, params);
        }
        history.epochs.push(stats);
    }
    Ok(history)
}

fn add_l2_grad(params: &ModelParams<f32>, grads: &mut Gradients<f32>, lambda: f64) {
    let two_l = (2.0 * lambda) as f32;
    for (i, e) in params.entries().iter().enumerate() {
        if e.trainable {
            for (g, w) in grads.get_mut(i).iter_mut().zip(e.tensor.values()) {
                *g += two_l * w;
            }
        }
    }
}

/// Stage one from a fresh initialization seeded by `cfg.seed`.
pub fn train_stage1(data: &Dataset, net_cfg: &NetConfig, cfg: &TrainConfig) -> Result<(ModelParams<f32>, TrainHistory)> {
    if cfg.stage != Stage::One {
        return Err(Error::InvalidArgument("stage-1 training needs a stage-1 config".into()));
    }
    let net = net_for(data, net_cfg)?;
    let mut params = net.init_params(cfg.seed);
    let history = train(data, net_cfg, &mut params, cfg, TrainHooks::default())?;
    Ok((params, history))
}

/// Stage two: continues from stage-one parameters with the T-Net frozen.
pub fn train_stage2(
    data: &Dataset,
    params: &ModelParams<f32>,
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(ModelParams<f32>, TrainHistory)> {
    if cfg.stage != Stage::Two {
        return Err(Error::InvalidArgument("stage-2 training needs a stage-2 config".into()));
    }
    let mut params = params.clone();
    let history = train(data, net_cfg, &mut params, cfg, TrainHooks::default())?;
    Ok((params, history))
}

/// Predictions for every sample (normalized space, fixed point order).
pub fn predict_dataset(net: &PoseNet, params: &ModelParams<f32>, data: &Dataset) -> Result<Vec<Pose>> {
    data.samples
        .par_iter()
        .map(|s| Ok(net.predict(params, &s.cloud, &s.target.joint_names)?.0))
        .collect()
}

/// Mean objective and mean squared error over the dataset without updates.
pub fn evaluate_loss(net: &PoseNet, params: &ModelParams<f32>, data: &Dataset, lambda: f64) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let preds = predict_dataset(net, params, data)?;
    let data_loss = preds
        .iter()
        .zip(&data.samples)
        .map(|(p, s)| squared_error(&p.flatten(), &s.target.flatten()).0)
        .sum::<f64>()
        / data.len() as f64;
    Ok((data_loss + lambda * params.trainable_sq_norm(), data_loss))
}

/// mAP@10cm (percent) of the network on `data`, measured in camera space.
pub fn validation_map(net: &PoseNet, params: &ModelParams<f32>, data: &Dataset) -> Result<f64> {
    let preds = predict_dataset(net, params, data)?;
    let mut cam_preds = Vec::with_capacity(preds.len());
    let mut cam_gts = Vec::with_capacity(preds.len());
    for (p, s) in preds.iter().zip(&data.samples) {
        cam_preds.push(denormalize_pose(p, &s.body_box)?);
        cam_gts.push(s.camera_target()?);
    }
    Ok(map_score(&cam_preds, &cam_gts, DEFAULT_THRESHOLD)?.mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_params(v: f32) -> ModelParams<f32> {
        let mut p = ModelParams::new();
        p.insert("w", Tensor::new(vec![1], vec![v]).unwrap()).unwrap();
        p
    }

    fn normalized(joints: Vec<[f64; 3]>) -> Pose {
        let names = (0..joints.len()).map(|i| format!("j{i}")).collect();
        Pose::new(joints, names, PoseSpace::Normalized).unwrap()
    }

    #[test]
    fn loss_examples() {
        let zero = scalar_params(0.0);
        let gt = normalized(vec![[0.1, 0.2, 0.3], [0.0, 0.0, 0.0]]);
        assert_eq!(loss(&gt, &gt, &zero, 5e-4).unwrap().0, 0.0);
        let pred = normalized(vec![[0.2, 0.2, 0.3], [0.0, 0.0, 0.0]]);
        let (l, g) = loss(&pred, &gt, &zero, 0.0).unwrap();
        assert!((l - 0.01).abs() < 1e-12);
        assert!((g[0] - 0.2).abs() < 1e-12);
        assert!(g[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn loss_regularizer_matches_direct_sum() {
        let mut p = ModelParams::new();
        p.insert("a", Tensor::new(vec![2], vec![0.5f32, -1.5]).unwrap()).unwrap();
        p.insert("b", Tensor::new(vec![1], vec![2.0f32]).unwrap()).unwrap();
        let gt = normalized(vec![[0.0; 3]]);
        let (l, _) = loss(&gt, &gt, &p, 0.1).unwrap();
        assert!((l - 0.1 * (0.25 + 2.25 + 4.0)).abs() < 1e-9);
        p.set_trainable("b", false).unwrap();
        let (l, _) = loss(&gt, &gt, &p, 0.1).unwrap();
        assert!((l - 0.1 * 2.5).abs() < 1e-9);
    }

    #[test]
    fn loss_rejects_mismatch() {
        let p = scalar_params(0.0);
        let a = normalized(vec![[0.0; 3]]);
        let b = normalized(vec![[0.0; 3], [1.0; 3]]);
        assert!(loss(&a, &b, &p, 0.0).is_err());
        let cam = Pose::new(vec![[0.0; 3]], vec!["j0".into()], PoseSpace::Camera).unwrap();
        assert!(loss(&a, &cam, &p, 0.0).is_err());
    }

    #[test]
    fn adam_first_step() {
        let mut p = scalar_params(1.0f32).cast::<f64>();
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(0)[0] = 1.0;
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 1e-3, 0.9, 0.999, 1e-8).unwrap();
        let expected = 1.0 - 1e-3 / (1.0 + 1e-8);
        assert!((p.values(0)[0] - expected).abs() < 1e-15);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_zero_gradient_and_frozen() {
        let mut p = scalar_params(0.7);
        let g = Gradients::zeros_like(&p);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 1e-3, 0.9, 0.999, 1e-8).unwrap();
        assert_eq!(p.values(0)[0], 0.7);

        p.set_trainable("w", false).unwrap();
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(0)[0] = 3.0;
        adam_step(&mut p, &g, &mut s, 1e-3, 0.9, 0.999, 1e-8).unwrap();
        assert_eq!(p.values(0)[0], 0.7);
    }

    #[test]
    fn adam_moves_toward_quadratic_minimum() {
        let a = 2.0;
        let mut p = scalar_params(-1.0).cast::<f64>();
        let mut s = AdamState::new(&p);
        let mut prev = (p.values(0)[0] - a).abs();
        for _ in 0..200 {
            let mut g = Gradients::zeros_like(&p);
            g.get_mut(0)[0] = p.values(0)[0] - a;
            adam_step(&mut p, &g, &mut s, 0.05, 0.9, 0.999, 1e-8).unwrap();
            let d = (p.values(0)[0] - a).abs();
            assert!(d <= prev + 1e-12 || d < 0.1);
            prev = d;
        }
        assert!(prev < 0.1);
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut p = scalar_params(0.0);
        let other = ModelParams::<f32>::new();
        let g = Gradients::zeros_like(&other);
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &g, &mut s, 1e-3, 0.9, 0.999, 1e-8).is_err());
    }

    #[test]
    fn config_defaults_and_schedule() {
        let c = TrainConfig::stage1();
        c.validate().unwrap();
        assert_eq!((c.lr, c.batch_size, c.epochs, c.lambda), (1e-3, 4, 80, 5e-4));
        assert_eq!(c.lr_at(49), 1e-3);
        assert!((c.lr_at(50) - 1e-4).abs() < 1e-18);
        let c2 = TrainConfig::stage2();
        assert_eq!((c2.lr, c2.epochs, c2.shuffle_points), (1e-5, 40, false));
        let bad = TrainConfig { beta2: 1.0, ..TrainConfig::stage1() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let cfg = NetConfig::desk(16, 4, 2, 16);
        assert!(train_stage1(&Dataset::default(), &cfg, &TrainConfig::stage1()).is_err());
    }
}
