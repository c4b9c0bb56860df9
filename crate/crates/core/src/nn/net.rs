//! The pose regression network: spatial transform, two stacked EdgeConv
//! units, global max pooling and a fully connected head.
//!
//! ```text
//! points (N x 3) --T-Net--> 3x3 transform --> aligned points
//!   unit 1: EdgeConv_a -> EdgeConv_b -> concat -> MLP -> per-point features
//!   unit 2: same structure over unit 1's per-point features
//!   [maxpool(unit 1) ++ maxpool(unit 2)] -> FC -> FC -> FC (3M, linear)
//! ```

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{NetConfig, TNET_EDGE_CHANNELS, TNET_FC_CHANNELS, TNET_POINT_CHANNELS};
use super::layers::{
    apply_transform, apply_transform_backward, edge_linear_backward, edge_linear_forward,
    edgeconv_backward, edgeconv_forward, global_max_pool, global_max_pool_backward, group_max,
    group_max_backward, shared_mlp_backward, shared_mlp_forward, EdgeConvCache, Linear, LinearGrad,
};
use crate::error::{Error, Result};
use crate::graph::{knn, NeighborIndex};
use crate::tensor::{Gradients, ModelParams, Scalar, Tensor};
use crate::types::{PointCloud, Pose, PoseSpace};

/// Prefix shared by every spatial-transform tensor.
pub const TNET_PREFIX: &str = "tnet.";

#[derive(Debug, Clone, Copy)]
struct LayerIds {
    weight: usize,
    bias: usize,
    c_in: usize,
    c_out: usize,
}

#[derive(Debug, Clone)]
struct TNetLayers {
    edge1: LayerIds,
    edge2: LayerIds,
    point: LayerIds,
    fc: Vec<LayerIds>,
}

#[derive(Debug, Clone, Copy)]
struct UnitLayers {
    edge_a: LayerIds,
    edge_b: LayerIds,
    mlp: LayerIds,
}

/// Network structure bound to a [`NetConfig`]; parameters live separately in
/// a [`ModelParams`] laid out by [`PoseNet::layout`].
#[derive(Debug, Clone)]
pub struct PoseNet {
    cfg: NetConfig,
    layout: Vec<(String, Vec<usize>)>,
    tnet: TNetLayers,
    units: [UnitLayers; 2],
    head: Vec<LayerIds>,
}

struct LayoutBuilder {
    entries: Vec<(String, Vec<usize>)>,
}

impl LayoutBuilder {
    fn linear(&mut self, name: &str, c_in: usize, c_out: usize) -> LayerIds {
        let weight = self.entries.len();
        self.entries.push((format!("{name}.weight"), vec![c_in, c_out]));
        self.entries.push((format!("{name}.bias"), vec![c_out]));
        LayerIds {
            weight,
            bias: weight + 1,
            c_in,
            c_out,
        }
    }
}

#[derive(Debug, Clone)]
struct TNetTrace<F> {
    graph: NeighborIndex,
    h1: Vec<F>,
    h2: Vec<F>,
    edge_arg: Vec<u16>,
    per_point: Vec<F>,
    h3: Vec<F>,
    pool_arg: Vec<u32>,
    pooled: Vec<F>,
    fc_outs: Vec<Vec<F>>,
}

#[derive(Debug, Clone)]
struct UnitTrace<F> {
    input: Vec<F>,
    c_in: usize,
    edge_a: EdgeConvCache<F>,
    edge_b: EdgeConvCache<F>,
    concat: Vec<F>,
    mlp_out: Vec<F>,
    pool_arg: Vec<u32>,
    pooled: Vec<F>,
}

/// Activations, neighbor tables and max-aggregation winners of one forward
/// pass; enough to compute exact gradients of that pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<F> {
    input: Vec<F>,
    tnet: TNetTrace<F>,
    transform: [F; 9],
    transformed: Vec<F>,
    units: Vec<UnitTrace<F>>,
    head_input: Vec<F>,
    head_outs: Vec<Vec<F>>,
}

impl<F: Scalar> ForwardTrace<F> {
    /// Flat `3M` network output in normalized coordinates.
    pub fn output(&self) -> &[F] {
        self.head_outs.last().expect("head has at least one layer")
    }

    /// The estimated 3x3 spatial transform (row-major).
    pub fn transform(&self) -> &[F; 9] {
        &self.transform
    }

    pub fn transformed_points(&self) -> &[F] {
        &self.transformed
    }

    /// Neighbor tables in evaluation order: T-Net, unit 1 (a, b), unit 2 (a, b).
    pub fn graphs(&self) -> Vec<NeighborIndex> {
        let mut g = vec![self.tnet.graph.clone()];
        for u in &self.units {
            g.push(u.edge_a.graph.clone());
            g.push(u.edge_b.graph.clone());
        }
        g
    }

    /// Concatenated pooled unit features fed to the head.
    pub fn global_features(&self) -> &[F] {
        &self.head_input
    }

    /// Hash of every ReLU mask and max-aggregation winner. Two passes with
    /// equal signatures (and graphs) lie on the same smooth piece.
    pub fn activation_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        let mask = |v: &[F], h: &mut DefaultHasher| {
            v.iter().map(|&x| x > F::zero()).collect::<Vec<bool>>().hash(h);
        };
        let t = &self.tnet;
        mask(&t.h1, &mut h);
        mask(&t.h2, &mut h);
        t.edge_arg.hash(&mut h);
        mask(&t.h3, &mut h);
        t.pool_arg.hash(&mut h);
        for o in &t.fc_outs[..t.fc_outs.len() - 1] {
            mask(o, &mut h);
        }
        for u in &self.units {
            for ec in [&u.edge_a, &u.edge_b] {
                ec.argmax.hash(&mut h);
                mask(&ec.out, &mut h);
            }
            mask(&u.mlp_out, &mut h);
            u.pool_arg.hash(&mut h);
        }
        for o in &self.head_outs[..self.head_outs.len() - 1] {
            mask(o, &mut h);
        }
        h.finish()
    }
}

fn linear<'a, F: Scalar>(params: &'a ModelParams<F>, ids: &LayerIds) -> Linear<'a, F> {
    Linear {
        weight: params.values(ids.weight),
        bias: params.values(ids.bias),
        c_in: ids.c_in,
        c_out: ids.c_out,
    }
}

fn grad_pair<'a, F: Scalar>(grads: &'a mut Gradients<F>, ids: &LayerIds) -> LinearGrad<'a, F> {
    debug_assert!(ids.weight < ids.bias);
    let (lo, hi) = grads.bufs.split_at_mut(ids.bias);
    LinearGrad {
        weight: &mut lo[ids.weight],
        bias: &mut hi[0],
    }
}

fn relu_mask<F: Scalar>(grad: &mut [F], act: &[F]) {
    for (g, &a) in grad.iter_mut().zip(act) {
        if !(a > F::zero()) {
            *g = F::zero();
        }
    }
}

impl PoseNet {
    pub fn new(cfg: NetConfig) -> Result<Self> {
        cfg.validate()?;
        let mut b = LayoutBuilder { entries: Vec::new() };
        let [t1, t2] = TNET_EDGE_CHANNELS.map(|c| cfg.scaled(c));
        let t3 = cfg.scaled(TNET_POINT_CHANNELS);
        let [f1, f2] = TNET_FC_CHANNELS.map(|c| cfg.scaled(c));
        let tnet = TNetLayers {
            edge1: b.linear("tnet.edge1", 6, t1),
            edge2: b.linear("tnet.edge2", t1, t2),
            point: b.linear("tnet.point", t2, t3),
            fc: vec![
                b.linear("tnet.fc1", t3, f1),
                b.linear("tnet.fc2", f1, f2),
                b.linear("tnet.fc3", f2, 9),
            ],
        };
        let (e, u) = (cfg.edge_width(), cfg.unit_width());
        let mut unit = |name: &str, c_in: usize| UnitLayers {
            edge_a: b.linear(&format!("{name}.edgeconv_a"), 2 * c_in, e),
            edge_b: b.linear(&format!("{name}.edgeconv_b"), 2 * e, e),
            mlp: b.linear(&format!("{name}.mlp"), 2 * e, u),
        };
        let units = [unit("unit1", 3), unit("unit2", u)];
        let mut width = if cfg.pool_both_units { 2 * u } else { u };
        let head = cfg
            .head_widths()
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                let ids = b.linear(&format!("head.fc{}", i + 1), width, w);
                width = w;
                ids
            })
            .collect();
        Ok(Self {
            cfg,
            layout: b.entries,
            tnet,
            units,
            head,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    /// Tensor names and shapes in registration order.
    pub fn layout(&self) -> &[(String, Vec<usize>)] {
        &self.layout
    }

    /// Glorot-uniform weights, zero biases, and a zero final T-Net layer so
    /// the initial transform is the identity.
    pub fn init_params<F: Scalar>(&self, seed: u64) -> ModelParams<F> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParams::new();
        let final_tnet = self.tnet.fc.last().expect("three T-Net FC layers").weight;
        for (id, (name, shape)) in self.layout.iter().enumerate() {
            let len: usize = shape.iter().product();
            let values = if shape.len() == 2 && id != final_tnet {
                let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                (0..len).map(|_| F::from_f64(dist.sample(&mut rng))).collect()
            } else {
                vec![F::zero(); len]
            };
            params
                .insert(name.clone(), Tensor::new(shape.clone(), values).expect("layout shape"))
                .expect("layout names are unique");
        }
        params
    }

    /// Reorders `params` into this network's layout, checking that every
    /// tensor is present exactly once with the expected shape.
    pub fn conform<F: Scalar>(&self, params: &ModelParams<F>) -> Result<ModelParams<F>> {
        let mut out = ModelParams::new();
        let mut problems = Vec::new();
        for (name, shape) in &self.layout {
            match params.id(name) {
                None => problems.push(format!("missing tensor `{name}`")),
                Some(id) => {
                    let e = params.entry(id);
                    if e.tensor.shape() != shape.as_slice() {
                        problems.push(format!(
                            "tensor `{name}` has shape {:?}, network expects {:?}",
                            e.tensor.shape(),
                            shape
                        ));
                    } else {
                        out.insert(name.clone(), e.tensor.clone())?;
                        out.set_trainable(name, e.trainable)?;
                    }
                }
            }
        }
        for e in params.entries() {
            if !self.layout.iter().any(|(n, _)| n == &e.name) {
                problems.push(format!("unexpected tensor `{}`", e.name));
            }
        }
        if problems.is_empty() {
            Ok(out)
        } else {
            Err(Error::Params(problems.join("; ")))
        }
    }

    fn check_params<F: Scalar>(&self, params: &ModelParams<F>) -> Result<()> {
        let ok = params.len() == self.layout.len()
            && self
                .layout
                .iter()
                .zip(params.entries())
                .all(|((n, s), e)| n == &e.name && e.tensor.shape() == s.as_slice());
        if ok {
            Ok(())
        } else {
            Err(Error::Params(
                "parameters do not follow the network layout (use PoseNet::conform)".into(),
            ))
        }
    }

    pub fn forward<F: Scalar>(&self, params: &ModelParams<F>, points: &[F]) -> Result<ForwardTrace<F>> {
        self.forward_with_graphs(params, points, None)
    }

    /// Forward pass; with `graphs` the recorded neighbor tables (as returned
    /// by [`ForwardTrace::graphs`]) are reused instead of recomputed.
    pub fn forward_with_graphs<F: Scalar>(
        &self,
        params: &ModelParams<F>,
        points: &[F],
        graphs: Option<&[NeighborIndex]>,
    ) -> Result<ForwardTrace<F>> {
        self.check_params(params)?;
        let n = self.cfg.n_points;
        let k = self.cfg.k_neighbors;
        if points.len() != 3 * n {
            return Err(Error::Shape(format!(
                "network expects {n} points, got {}",
                points.len() / 3
            )));
        }
        if let Some(g) = graphs {
            if g.len() != 5 || g.iter().any(|g| g.n() != n || g.k() != k) {
                return Err(Error::Shape("recorded graphs do not match the network".into()));
            }
        }
        let graph_at = |slot: usize, feats: &[F], d: usize| -> Result<NeighborIndex> {
            match graphs {
                Some(g) => Ok(g[slot].clone()),
                None => knn(feats, n, d, k),
            }
        };

        let tnet = self.tnet_forward(params, points, graph_at(0, points, 3)?)?;
        let mut transform = [F::zero(); 9];
        for (i, t) in transform.iter_mut().enumerate() {
            *t = tnet.fc_outs[2][i] + if i % 4 == 0 { F::one() } else { F::zero() };
        }
        let transformed = apply_transform(points, &transform);

        let coords = graph_at(1, &transformed, 3)?;
        let dynamic = self.cfg.dynamic_graph;
        let mut units: Vec<UnitTrace<F>> = Vec::with_capacity(2);
        for (ui, layers) in self.units.iter().enumerate() {
            let (input, c_in) = match units.last() {
                None => (transformed.clone(), 3),
                Some(prev) => (prev.mlp_out.clone(), self.cfg.unit_width()),
            };
            let graph_a = if ui == 0 || !dynamic {
                match graphs {
                    Some(g) => g[1 + 2 * ui].clone(),
                    None => coords.clone(),
                }
            } else {
                graph_at(1 + 2 * ui, &input, c_in)?
            };
            let edge_a = edgeconv_forward(&input, n, c_in, graph_a, &linear(params, &layers.edge_a))?;
            let e = layers.edge_a.c_out;
            let graph_b = if dynamic {
                graph_at(2 + 2 * ui, &edge_a.out, e)?
            } else {
                match graphs {
                    Some(g) => g[2 + 2 * ui].clone(),
                    None => coords.clone(),
                }
            };
            let edge_b = edgeconv_forward(&edge_a.out, n, e, graph_b, &linear(params, &layers.edge_b))?;
            let mut concat = Vec::with_capacity(n * 2 * e);
            for (ra, rb) in edge_a.out.chunks_exact(e).zip(edge_b.out.chunks_exact(e)) {
                concat.extend_from_slice(ra);
                concat.extend_from_slice(rb);
            }
            let mlp_out = shared_mlp_forward(&concat, n, &linear(params, &layers.mlp), true)?;
            let (pooled, pool_arg) = global_max_pool(&mlp_out, n, layers.mlp.c_out);
            units.push(UnitTrace {
                input,
                c_in,
                edge_a,
                edge_b,
                concat,
                mlp_out,
                pool_arg,
                pooled,
            });
        }

        let head_input: Vec<F> = if self.cfg.pool_both_units {
            units.iter().flat_map(|u| u.pooled.iter().copied()).collect()
        } else {
            units[1].pooled.clone()
        };
        let mut head_outs: Vec<Vec<F>> = Vec::with_capacity(self.head.len());
        for (i, ids) in self.head.iter().enumerate() {
            let x = head_outs.last().unwrap_or(&head_input);
            let relu = i + 1 < self.head.len();
            let y = shared_mlp_forward(x, 1, &linear(params, ids), relu)?;
            head_outs.push(y);
        }

        Ok(ForwardTrace {
            input: points.to_vec(),
            tnet,
            transform,
            transformed,
            units,
            head_input,
            head_outs,
        })
    }

    fn tnet_forward<F: Scalar>(&self, params: &ModelParams<F>, points: &[F], graph: NeighborIndex) -> Result<TNetTrace<F>> {
        let n = self.cfg.n_points;
        let k = graph.k();
        let t = &self.tnet;
        let mut h1 = edge_linear_forward(points, n, 3, &graph, &linear(params, &t.edge1))?;
        h1.iter_mut().for_each(|v| {
            if !(*v > F::zero()) {
                *v = F::zero()
            }
        });
        let h2 = shared_mlp_forward(&h1, n * k, &linear(params, &t.edge2), true)?;
        let (per_point, edge_arg) = group_max(&h2, n, k, t.edge2.c_out);
        let h3 = shared_mlp_forward(&per_point, n, &linear(params, &t.point), true)?;
        let (pooled, pool_arg) = global_max_pool(&h3, n, t.point.c_out);
        let mut fc_outs: Vec<Vec<F>> = Vec::with_capacity(3);
        for (i, ids) in t.fc.iter().enumerate() {
            let x = fc_outs.last().unwrap_or(&pooled);
            let y = shared_mlp_forward(x, 1, &linear(params, ids), i + 1 < t.fc.len())?;
            fc_outs.push(y);
        }
        Ok(TNetTrace {
            graph,
            h1,
            h2,
            edge_arg,
            per_point,
            h3,
            pool_arg,
            pooled,
            fc_outs,
        })
    }

    /// Accumulates `dL/dparams` for the recorded pass into `grads`, given
    /// `upstream = dL/doutput` (length `3M`).
    pub fn backward<F: Scalar>(
        &self,
        params: &ModelParams<F>,
        trace: &ForwardTrace<F>,
        upstream: &[F],
        grads: &mut Gradients<F>,
    ) -> Result<()> {
        self.check_params(params)?;
        if upstream.len() != 3 * self.cfg.m_joints {
            return Err(Error::Shape(format!(
                "upstream gradient has {} entries, expected {}",
                upstream.len(),
                3 * self.cfg.m_joints
            )));
        }
        if grads.len() != params.len() {
            return Err(Error::Shape("gradient set does not match parameters".into()));
        }
        let n = self.cfg.n_points;

        let mut d = upstream.to_vec();
        for (i, ids) in self.head.iter().enumerate().rev() {
            let x = if i == 0 { &trace.head_input } else { &trace.head_outs[i - 1] };
            let relu = i + 1 < self.head.len();
            d = shared_mlp_backward(x, 1, &linear(params, ids), &trace.head_outs[i], relu, &d, grad_pair(grads, ids), true)
                .expect("dx requested");
        }

        let u = self.cfg.unit_width();
        let (dpool1, dpool2) = if self.cfg.pool_both_units {
            (Some(&d[..u]), &d[u..])
        } else {
            (None, &d[..])
        };
        let mut dm2 = vec![F::zero(); n * u];
        global_max_pool_backward(&trace.units[1].pool_arg, u, dpool2, &mut dm2);
        let mut dm1 = self.unit_backward(params, &self.units[1], &trace.units[1], &dm2, grads)?;
        if let Some(dp) = dpool1 {
            global_max_pool_backward(&trace.units[0].pool_arg, u, dp, &mut dm1);
        }
        let dpoints = self.unit_backward(params, &self.units[0], &trace.units[0], &dm1, grads)?;
        let mut dt = apply_transform_backward(&trace.input, &dpoints).to_vec();

        self.tnet_backward(params, trace, &mut dt, grads)
    }

    fn unit_backward<F: Scalar>(
        &self,
        params: &ModelParams<F>,
        layers: &UnitLayers,
        t: &UnitTrace<F>,
        dmlp: &[F],
        grads: &mut Gradients<F>,
    ) -> Result<Vec<F>> {
        let n = self.cfg.n_points;
        let e = layers.edge_a.c_out;
        let dcat = shared_mlp_backward(&t.concat, n, &linear(params, &layers.mlp), &t.mlp_out, true, dmlp, grad_pair(grads, &layers.mlp), true)
            .expect("dx requested");
        let mut da = Vec::with_capacity(n * e);
        let mut db = Vec::with_capacity(n * e);
        for row in dcat.chunks_exact(2 * e) {
            da.extend_from_slice(&row[..e]);
            db.extend_from_slice(&row[e..]);
        }
        let dfrom_b = edgeconv_backward(&t.edge_a.out, e, &linear(params, &layers.edge_b), &t.edge_b, &db, grad_pair(grads, &layers.edge_b), true)?
            .expect("dx requested");
        for (a, b) in da.iter_mut().zip(&dfrom_b) {
            *a = *a + *b;
        }
        let dx = edgeconv_backward(&t.input, t.c_in, &linear(params, &layers.edge_a), &t.edge_a, &da, grad_pair(grads, &layers.edge_a), true)?
            .expect("dx requested");
        Ok(dx)
    }

    fn tnet_backward<F: Scalar>(
        &self,
        params: &ModelParams<F>,
        trace: &ForwardTrace<F>,
        dtransform: &mut Vec<F>,
        grads: &mut Gradients<F>,
    ) -> Result<()> {
        let n = self.cfg.n_points;
        let t = &self.tnet;
        let tt = &trace.tnet;
        let k = tt.graph.k();
        let mut d = std::mem::take(dtransform);
        for (i, ids) in t.fc.iter().enumerate().rev() {
            let x = if i == 0 { &tt.pooled } else { &tt.fc_outs[i - 1] };
            let relu = i + 1 < t.fc.len();
            d = shared_mlp_backward(x, 1, &linear(params, ids), &tt.fc_outs[i], relu, &d, grad_pair(grads, ids), true)
                .expect("dx requested");
        }
        let c3 = t.point.c_out;
        let mut dh3 = vec![F::zero(); n * c3];
        global_max_pool_backward(&tt.pool_arg, c3, &d, &mut dh3);
        let dpp = shared_mlp_backward(&tt.per_point, n, &linear(params, &t.point), &tt.h3, true, &dh3, grad_pair(grads, &t.point), true)
            .expect("dx requested");
        let dh2 = group_max_backward(&tt.edge_arg, n, k, t.edge2.c_out, &dpp);
        let mut dh1 = shared_mlp_backward(&tt.h1, n * k, &linear(params, &t.edge2), &tt.h2, true, &dh2, grad_pair(grads, &t.edge2), true)
            .expect("dx requested");
        relu_mask(&mut dh1, &tt.h1);
        edge_linear_backward(&trace.input, n, 3, &tt.graph, &linear(params, &t.edge1), &dh1, grad_pair(grads, &t.edge1), false)?;
        Ok(())
    }

    /// Backward pass accumulating straight into the tensors' gradient slots.
    pub fn backward_into_params<F: Scalar>(
        &self,
        params: &mut ModelParams<F>,
        trace: &ForwardTrace<F>,
        upstream: &[F],
    ) -> Result<()> {
        let mut grads = Gradients::zeros_like(params);
        self.backward(params, trace, upstream, &mut grads)?;
        params.accumulate_grads(&grads)
    }

    /// Normalized-space pose prediction for a normalized cloud.
    pub fn predict(&self, params: &ModelParams<f32>, cloud: &PointCloud, joint_names: &[String]) -> Result<(Pose, ForwardTrace<f32>)> {
        if joint_names.len() != self.cfg.m_joints {
            return Err(Error::JointCount {
                expected: self.cfg.m_joints,
                actual: joint_names.len(),
            });
        }
        if cloud.len() != self.cfg.n_points {
            return Err(Error::Shape(format!(
                "network expects {} points, cloud has {}",
                self.cfg.n_points,
                cloud.len()
            )));
        }
        let trace = self.forward(params, &cloud.to_f32_rows())?;
        let flat: Vec<f64> = trace.output().iter().map(|&v| v as f64).collect();
        let pose = Pose::from_flat(&flat, joint_names.to_vec(), PoseSpace::Normalized)?;
        Ok((pose, trace))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PoseNet {
        PoseNet::new(NetConfig::desk(16, 4, 2, 16)).unwrap()
    }

    fn cloud(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Uniform::new(-0.5, 0.5);
        (0..3 * n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn output_has_three_m_entries() {
        let net = tiny();
        let p = net.init_params::<f64>(1);
        let t = net.forward(&p, &cloud(16, 2)).unwrap();
        assert_eq!(t.output().len(), 6);
    }

    #[test]
    fn initial_transform_is_identity() {
        let net = tiny();
        let p = net.init_params::<f64>(1);
        let t = net.forward(&p, &cloud(16, 2)).unwrap();
        assert_eq!(t.transform(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn wrong_point_count_is_rejected() {
        let net = tiny();
        let p = net.init_params::<f64>(1);
        assert!(net.forward(&p, &cloud(15, 2)).is_err());
    }

    #[test]
    fn zero_head_weights_output_bias() {
        let net = tiny();
        let mut p = net.init_params::<f64>(1);
        let last = net.head.last().unwrap();
        p.entries_mut()[last.weight].tensor.values_mut().iter_mut().for_each(|v| *v = 0.0);
        let bias = [0.1, -0.2, 0.3, 0.4, -0.5, 0.6];
        p.entries_mut()[last.bias].tensor.values_mut().copy_from_slice(&bias);
        let t = net.forward(&p, &cloud(16, 3)).unwrap();
        assert_eq!(t.output(), &bias);
    }

    #[test]
    fn conform_reorders_and_reports_names() {
        let net = tiny();
        let p = net.init_params::<f32>(4);
        let mut shuffled = ModelParams::new();
        for e in p.entries().iter().rev() {
            shuffled.insert(e.name.clone(), e.tensor.clone()).unwrap();
        }
        assert_eq!(net.conform(&shuffled).unwrap(), p);

        let other = PoseNet::new(NetConfig::desk(16, 4, 3, 16)).unwrap();
        let err = other.conform(&p).unwrap_err().to_string();
        assert!(err.contains("head.fc3.weight"), "{err}");
    }

    #[test]
    fn layout_names_cover_all_parts() {
        let net = PoseNet::new(NetConfig::full(15)).unwrap();
        let names: Vec<&str> = net.layout().iter().map(|(n, _)| n.as_str()).collect();
        for expected in ["tnet.edge1.weight", "unit1.edgeconv_a.weight", "unit2.mlp.bias", "head.fc3.weight"] {
            assert!(names.contains(&expected));
        }
        let shape = |n: &str| net.layout().iter().find(|(m, _)| m == n).unwrap().1.clone();
        assert_eq!(shape("unit1.edgeconv_a.weight"), vec![6, 128]);
        assert_eq!(shape("unit1.mlp.weight"), vec![256, 1024]);
        assert_eq!(shape("unit2.edgeconv_a.weight"), vec![2048, 128]);
        assert_eq!(shape("head.fc1.weight"), vec![2048, 1024]);
        assert_eq!(shape("head.fc3.weight"), vec![512, 45]);
    }

    #[test]
    fn single_unit_head_width() {
        let mut cfg = NetConfig::desk(16, 4, 2, 16);
        cfg.pool_both_units = false;
        let net = PoseNet::new(cfg).unwrap();
        let fc1 = net.layout().iter().find(|(n, _)| n == "head.fc1.weight").unwrap();
        assert_eq!(fc1.1[0], 64);
        let p = net.init_params::<f64>(0);
        let t = net.forward(&p, &cloud(16, 1)).unwrap();
        let mut g = Gradients::zeros_like(&p);
        net.backward(&p, &t, &[1.0; 6], &mut g).unwrap();
    }
}
