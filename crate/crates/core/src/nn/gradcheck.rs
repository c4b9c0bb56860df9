//! Central finite-difference checks of analytic gradients (64-bit).
//!
//! The network is piecewise smooth: ReLU masks and max-aggregation winners
//! switch at kinks. Each probe therefore compares the activation signature
//! at `theta +- eps` with the one at `theta` and shrinks `eps` tenfold while
//! a probe would straddle a kink.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::{ForwardTrace, PoseNet};
use crate::error::{Error, Result};
use crate::graph::NeighborIndex;
use crate::tensor::{Gradients, ModelParams};

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Initial central-difference step.
    pub eps: f64,
    /// Smallest step tried when probes cross a kink.
    pub min_eps: f64,
    /// Check at most this many randomly chosen scalars per tensor.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            min_eps: 1e-9,
            max_per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Probes whose smallest step still crossed a kink.
    pub unresolved_kinks: usize,
    pub worst: Option<GradCheckEntry>,
    /// Max relative error per checked tensor.
    pub per_tensor: Vec<(String, f64)>,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` with central differences of `eval`, which returns the
/// scalar loss and an activation signature for the given parameters.
pub fn check_gradients<E>(
    params: &ModelParams<f64>,
    analytic: &Gradients<f64>,
    mut eval: E,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    E: FnMut(&ModelParams<f64>) -> Result<(f64, u64)>,
{
    if !(cfg.eps > 0.0) || !(cfg.min_eps > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    if analytic.len() != params.len() {
        return Err(Error::Shape("gradient set does not match parameters".into()));
    }
    let (_, base_sig) = eval(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport::default();

    for id in 0..params.len() {
        let len = params.entry(id).tensor.len();
        let picks: Vec<usize> = match cfg.max_per_tensor {
            Some(cap) if cap < len => {
                let mut v = sample(&mut rng, len, cap).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..len).collect(),
        };
        let mut tensor_max = 0.0f64;
        for i in picks {
            let orig = params.entry(id).tensor.values()[i];
            let mut eps = cfg.eps;
            let numeric = loop {
                probe.entries_mut()[id].tensor.values_mut()[i] = orig + eps;
                let (fp, sp) = eval(&probe)?;
                probe.entries_mut()[id].tensor.values_mut()[i] = orig - eps;
                let (fm, sm) = eval(&probe)?;
                let fd = (fp - fm) / (2.0 * eps);
                if sp == base_sig && sm == base_sig {
                    break fd;
                }
                if eps / 10.0 < cfg.min_eps {
                    report.unresolved_kinks += 1;
                    break fd;
                }
                eps /= 10.0;
            };
            probe.entries_mut()[id].tensor.values_mut()[i] = orig;
            let a = analytic.get(id)[i];
            let err = relative_error(a, numeric);
            report.checked += 1;
            tensor_max = tensor_max.max(err);
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some(GradCheckEntry {
                    tensor: params.entry(id).name.clone(),
                    index: i,
                    analytic: a,
                    numeric,
                    rel_error: err,
                });
            }
        }
        report.per_tensor.push((params.entry(id).name.clone(), tensor_max));
    }
    Ok(report)
}

/// Scalar objective used for network checks:
/// `sum (out - target)^2 + lambda * ||params||^2`.
pub fn pose_objective(output: &[f64], target: &[f64], params: &ModelParams<f64>, lambda: f64) -> f64 {
    let data: f64 = output.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum();
    data + lambda * params.trainable_sq_norm()
}

/// Analytic gradient of [`pose_objective`] for one forward pass.
pub fn pose_objective_grad(
    net: &PoseNet,
    params: &ModelParams<f64>,
    trace: &ForwardTrace<f64>,
    target: &[f64],
    lambda: f64,
) -> Result<Gradients<f64>> {
    let upstream: Vec<f64> = trace.output().iter().zip(target).map(|(o, t)| 2.0 * (o - t)).collect();
    let mut grads = Gradients::zeros_like(params);
    net.backward(params, trace, &upstream, &mut grads)?;
    for (id, e) in params.entries().iter().enumerate() {
        if e.trainable {
            for (g, w) in grads.get_mut(id).iter_mut().zip(e.tensor.values()) {
                *g += 2.0 * lambda * w;
            }
        }
    }
    Ok(grads)
}

/// Full-network check with the neighbor graphs of the unperturbed pass held
/// fixed (kNN selection is piecewise constant and has no gradient).
pub fn check_pose_net(
    net: &PoseNet,
    params: &ModelParams<f64>,
    points: &[f64],
    target: &[f64],
    lambda: f64,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let trace = net.forward(params, points)?;
    let graphs: Vec<NeighborIndex> = trace.graphs();
    let analytic = pose_objective_grad(net, params, &trace, target, lambda)?;
    check_gradients(
        params,
        &analytic,
        |p| {
            let t = net.forward_with_graphs(p, points, Some(&graphs))?;
            Ok((pose_objective(t.output(), target, p, lambda), t.activation_signature()))
        },
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::{shared_mlp_backward, shared_mlp_forward, Linear, LinearGrad};
    use crate::tensor::Tensor;

    fn affine_params() -> ModelParams<f64> {
        let mut p = ModelParams::new();
        p.insert("w", Tensor::new(vec![3, 2], vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.5]).unwrap()).unwrap();
        p.insert("b", Tensor::new(vec![2], vec![0.1, -0.2]).unwrap()).unwrap();
        p
    }

    const X: [f64; 6] = [1.0, 2.0, -1.0, 0.5, 0.0, 3.0];
    const R: [f64; 4] = [0.3, -0.7, 1.1, 0.2];

    fn affine_eval(p: &ModelParams<f64>) -> Result<(f64, u64)> {
        let layer = Linear::new(p.values(0), p.values(1), 3, 2)?;
        let y = shared_mlp_forward(&X, 2, &layer, false)?;
        Ok((y.iter().zip(&R).map(|(a, b)| a * b).sum(), 0))
    }

    fn affine_grads(p: &ModelParams<f64>) -> Gradients<f64> {
        let layer = Linear::new(p.values(0), p.values(1), 3, 2).unwrap();
        let y = shared_mlp_forward(&X, 2, &layer, false).unwrap();
        let mut g = Gradients::zeros_like(p);
        let (gw, gb) = g.bufs.split_at_mut(1);
        shared_mlp_backward(&X, 2, &layer, &y, false, &R, LinearGrad { weight: &mut gw[0], bias: &mut gb[0] }, false);
        g
    }

    #[test]
    fn linear_layer_is_exact() {
        let p = affine_params();
        let g = affine_grads(&p);
        let r = check_gradients(&p, &g, affine_eval, &GradCheckConfig::default()).unwrap();
        assert_eq!(r.checked, 8);
        assert!(r.max_rel_error < 1e-7, "{r:?}");
    }

    #[test]
    fn doubled_gradient_is_caught() {
        let p = affine_params();
        let mut g = affine_grads(&p);
        g.scale(2.0);
        let r = check_gradients(&p, &g, affine_eval, &GradCheckConfig::default()).unwrap();
        assert!((r.max_rel_error - 0.5).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn rel_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-10, 0.0) - 1e-2).abs() < 1e-12);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_step() {
        let p = affine_params();
        let g = affine_grads(&p);
        let cfg = GradCheckConfig { eps: 0.0, ..Default::default() };
        assert!(check_gradients(&p, &g, affine_eval, &cfg).is_err());
    }

    fn small_case(n: usize, k: usize, scale: usize) -> (PoseNet, ModelParams<f64>, Vec<f64>, Vec<f64>) {
        use rand::Rng;
        let net = PoseNet::new(crate::nn::NetConfig::desk(n, k, 3, scale)).unwrap();
        let mut p = net.init_params::<f64>(7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // Zero biases put dead units exactly on a ReLU kink, and the
        // zero-initialised transform layer would hide upstream T-Net gradients.
        for e in p.entries_mut() {
            if e.name.ends_with(".bias") || e.name == "tnet.fc3.weight" {
                for v in e.tensor.values_mut() {
                    *v = rng.gen_range(-0.1..0.1);
                }
            }
        }
        let pts = (0..3 * n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let target = (0..9).map(|_| rng.gen_range(-0.5..0.5)).collect();
        (net, p, pts, target)
    }

    #[test]
    fn full_network_matches_finite_differences() {
        let (net, p, pts, target) = small_case(12, 4, 32);
        let r = check_pose_net(&net, &p, &pts, &target, 5e-4, &GradCheckConfig::default()).unwrap();
        assert_eq!(r.checked, p.num_scalars());
        assert!(r.max_rel_error < 1e-4, "{:?}", r.worst);
    }
}
