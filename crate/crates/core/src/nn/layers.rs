//! Layer kernels over row-major buffers, each with its hand-derived
//! backward pass.
//!
//! A shared MLP layer maps every row of an `rows x c_in` buffer through the
//! same affine map (optionally followed by ReLU). EdgeConv evaluates that
//! map on `[x_i, x_j - x_i]` edge features; its first affine layer is
//! factored as `A_i + B_j` with `A = x (W_c - W_d) + b` and `B = x W_d`,
//! which equals the edge-feature product without materializing it.

use crate::error::{Error, Result};
use crate::graph::NeighborIndex;
use crate::tensor::Scalar;

/// Borrowed weights of one affine layer, `weight` is `c_in x c_out`.
#[derive(Debug, Clone, Copy)]
pub struct Linear<'a, F> {
    pub weight: &'a [F],
    pub bias: &'a [F],
    pub c_in: usize,
    pub c_out: usize,
}

impl<'a, F: Scalar> Linear<'a, F> {
    pub fn new(weight: &'a [F], bias: &'a [F], c_in: usize, c_out: usize) -> Result<Self> {
        if weight.len() != c_in * c_out || bias.len() != c_out {
            return Err(Error::Shape(format!(
                "linear layer {c_in}->{c_out} got weight {} / bias {}",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            weight,
            bias,
            c_in,
            c_out,
        })
    }
}

/// Mutable gradient slots for one affine layer.
pub struct LinearGrad<'a, F> {
    pub weight: &'a mut [F],
    pub bias: &'a mut [F],
}

fn affine<F: Scalar>(x: &[F], rows: usize, w: &[F], bias: Option<&[F]>, c_in: usize, c_out: usize) -> Vec<F> {
    let mut out = vec![F::zero(); rows * c_out];
    for (xr, o) in x.chunks_exact(c_in).zip(out.chunks_exact_mut(c_out)).take(rows) {
        if let Some(b) = bias {
            o.copy_from_slice(b);
        }
        for (&xa, wr) in xr.iter().zip(w.chunks_exact(c_out)) {
            if xa == F::zero() {
                continue;
            }
            for (oc, &wc) in o.iter_mut().zip(wr) {
                *oc = *oc + xa * wc;
            }
        }
    }
    out
}

/// `dw += x^T dz`, `db += sum_rows dz`.
fn accumulate_weight_grad<F: Scalar>(x: &[F], dz: &[F], c_in: usize, c_out: usize, dw: &mut [F], db: Option<&mut [F]>) {
    for (xr, dzr) in x.chunks_exact(c_in).zip(dz.chunks_exact(c_out)) {
        for (&xa, dwr) in xr.iter().zip(dw.chunks_exact_mut(c_out)) {
            if xa == F::zero() {
                continue;
            }
            for (d, &g) in dwr.iter_mut().zip(dzr) {
                *d = *d + xa * g;
            }
        }
    }
    if let Some(db) = db {
        for dzr in dz.chunks_exact(c_out) {
            for (d, &g) in db.iter_mut().zip(dzr) {
                *d = *d + g;
            }
        }
    }
}

/// `dx += dz W^T`.
fn accumulate_input_grad<F: Scalar>(dz: &[F], w: &[F], c_in: usize, c_out: usize, dx: &mut [F]) {
    let mut wt = vec![F::zero(); c_in * c_out];
    for a in 0..c_in {
        for c in 0..c_out {
            wt[c * c_in + a] = w[a * c_out + c];
        }
    }
    for (dzr, dxr) in dz.chunks_exact(c_out).zip(dx.chunks_exact_mut(c_in)) {
        for (&g, wtr) in dzr.iter().zip(wt.chunks_exact(c_in)) {
            if g == F::zero() {
                continue;
            }
            for (d, &wv) in dxr.iter_mut().zip(wtr) {
                *d = *d + g * wv;
            }
        }
    }
}

fn relu_in_place<F: Scalar>(v: &mut [F]) {
    for x in v.iter_mut() {
        if !(*x > F::zero()) {
            *x = F::zero();
        }
    }
}

/// Row-wise affine map, followed by ReLU when `relu` is set.
pub fn shared_mlp_forward<F: Scalar>(x: &[F], rows: usize, layer: &Linear<'_, F>, relu: bool) -> Result<Vec<F>> {
    if x.len() != rows * layer.c_in {
        return Err(Error::Shape(format!(
            "shared MLP input has {} values, expected {rows}x{}",
            x.len(),
            layer.c_in
        )));
    }
    let mut out = affine(x, rows, layer.weight, Some(layer.bias), layer.c_in, layer.c_out);
    if relu {
        relu_in_place(&mut out);
    }
    Ok(out)
}

/// Backward of [`shared_mlp_forward`]. `out` is the forward output (its
/// positive entries define the ReLU mask). Returns `dL/dx` when requested.
#[allow(clippy::too_many_arguments)]
pub fn shared_mlp_backward<F: Scalar>(
    x: &[F],
    rows: usize,
    layer: &Linear<'_, F>,
    out: &[F],
    relu: bool,
    dout: &[F],
    grad: LinearGrad<'_, F>,
    want_dx: bool,
) -> Option<Vec<F>> {
    let (c_in, c_out) = (layer.c_in, layer.c_out);
    debug_assert_eq!(dout.len(), rows * c_out);
    let dz: Vec<F> = if relu {
        dout.iter()
            .zip(out)
            .map(|(&g, &o)| if o > F::zero() { g } else { F::zero() })
            .collect()
    } else {
        dout.to_vec()
    };
    accumulate_weight_grad(x, &dz, c_in, c_out, grad.weight, Some(grad.bias));
    want_dx.then(|| {
        let mut dx = vec![F::zero(); rows * c_in];
        accumulate_input_grad(&dz, layer.weight, c_in, c_out, &mut dx);
        dx
    })
}

/// The two halves of an edge layer's weight and their difference.
struct EdgeWeights<F> {
    diff: Vec<F>,
}

fn split_edge_weight<'a, F: Scalar>(layer: &Linear<'a, F>, c: usize) -> Result<(&'a [F], &'a [F], EdgeWeights<F>)> {
    if layer.c_in != 2 * c {
        return Err(Error::Shape(format!(
            "edge layer expects {} input channels for {c}-dim features, has {}",
            2 * c,
            layer.c_in
        )));
    }
    let (center, delta) = layer.weight.split_at(c * layer.c_out);
    let diff = center.iter().zip(delta).map(|(&a, &b)| a - b).collect();
    Ok((center, delta, EdgeWeights { diff }))
}

/// Affine map applied to every edge feature `[x_i, x_nbr - x_i]`; returns
/// the `n*k x c_out` pre-activations.
pub fn edge_linear_forward<F: Scalar>(x: &[F], n: usize, c: usize, nbr: &NeighborIndex, layer: &Linear<'_, F>) -> Result<Vec<F>> {
    let (_, delta, ew) = split_edge_weight(layer, c)?;
    if x.len() != n * c || nbr.n() != n {
        return Err(Error::Shape("edge layer input does not match graph".into()));
    }
    let c_out = layer.c_out;
    let a = affine(x, n, &ew.diff, Some(layer.bias), c, c_out);
    let b = affine(x, n, delta, None, c, c_out);
    let k = nbr.k();
    let mut out = vec![F::zero(); n * k * c_out];
    for i in 0..n {
        let ai = &a[i * c_out..(i + 1) * c_out];
        for (s, &m) in nbr.row(i).iter().enumerate() {
            let bm = &b[m as usize * c_out..(m as usize + 1) * c_out];
            let o = &mut out[(i * k + s) * c_out..(i * k + s + 1) * c_out];
            for ((o, &p), &q) in o.iter_mut().zip(ai).zip(bm) {
                *o = p + q;
            }
        }
    }
    Ok(out)
}

/// Gradient of the factored edge layer given per-point `dA` and per-point
/// `dB` (already scattered to neighbor rows).
#[allow(clippy::too_many_arguments)]
fn edge_weight_backward<F: Scalar>(
    x: &[F],
    c: usize,
    c_out: usize,
    delta: &[F],
    ew: &EdgeWeights<F>,
    da: &[F],
    db_rows: &[F],
    grad: LinearGrad<'_, F>,
    want_dx: bool,
) -> Option<Vec<F>> {
    let mut g_diff = vec![F::zero(); c * c_out];
    accumulate_weight_grad(x, da, c, c_out, &mut g_diff, Some(grad.bias));
    let mut g_delta = vec![F::zero(); c * c_out];
    accumulate_weight_grad(x, db_rows, c, c_out, &mut g_delta, None);
    let (gw_center, gw_delta) = grad.weight.split_at_mut(c * c_out);
    for (g, &d) in gw_center.iter_mut().zip(&g_diff) {
        *g = *g + d;
    }
    for ((g, &d), &df) in gw_delta.iter_mut().zip(&g_delta).zip(&g_diff) {
        *g = *g + d - df;
    }
    want_dx.then(|| {
        let n = x.len() / c;
        let mut dx = vec![F::zero(); n * c];
        accumulate_input_grad(da, &ew.diff, c, c_out, &mut dx);
        accumulate_input_grad(db_rows, delta, c, c_out, &mut dx);
        dx
    })
}

/// Backward of [`edge_linear_forward`] given `dL/dpre` (`n*k x c_out`).
#[allow(clippy::too_many_arguments)]
pub fn edge_linear_backward<F: Scalar>(
    x: &[F],
    n: usize,
    c: usize,
    nbr: &NeighborIndex,
    layer: &Linear<'_, F>,
    dpre: &[F],
    grad: LinearGrad<'_, F>,
    want_dx: bool,
) -> Result<Option<Vec<F>>> {
    let (_, delta, ew) = split_edge_weight(layer, c)?;
    let (k, c_out) = (nbr.k(), layer.c_out);
    let mut da = vec![F::zero(); n * c_out];
    let mut db = vec![F::zero(); n * c_out];
    for i in 0..n {
        for (s, &m) in nbr.row(i).iter().enumerate() {
            let g = &dpre[(i * k + s) * c_out..(i * k + s + 1) * c_out];
            for (d, &v) in da[i * c_out..(i + 1) * c_out].iter_mut().zip(g) {
                *d = *d + v;
            }
            for (d, &v) in db[m as usize * c_out..(m as usize + 1) * c_out].iter_mut().zip(g) {
                *d = *d + v;
            }
        }
    }
    Ok(edge_weight_backward(x, c, c_out, delta, &ew, &da, &db, grad, want_dx))
}

/// Cached state of one EdgeConv evaluation.
#[derive(Debug, Clone)]
pub struct EdgeConvCache<F> {
    pub graph: NeighborIndex,
    /// Winning neighbor slot per `(point, channel)`.
    pub argmax: Vec<u16>,
    /// `n x c_out` output after ReLU and max aggregation.
    pub out: Vec<F>,
}

/// Edge features, shared affine + ReLU, max over the k neighbors.
pub fn edgeconv_forward<F: Scalar>(x: &[F], n: usize, c: usize, graph: NeighborIndex, layer: &Linear<'_, F>) -> Result<EdgeConvCache<F>> {
    let (_, delta, ew) = split_edge_weight(layer, c)?;
    if x.len() != n * c || graph.n() != n {
        return Err(Error::Shape("EdgeConv input does not match graph".into()));
    }
    if graph.k() > u16::MAX as usize {
        return Err(Error::InvalidArgument("k exceeds 65535".into()));
    }
    let c_out = layer.c_out;
    let a = affine(x, n, &ew.diff, Some(layer.bias), c, c_out);
    let b = affine(x, n, delta, None, c, c_out);
    let mut out = vec![F::zero(); n * c_out];
    let mut argmax = vec![0u16; n * c_out];
    for i in 0..n {
        let ai = &a[i * c_out..(i + 1) * c_out];
        let best = &mut out[i * c_out..(i + 1) * c_out];
        let arg = &mut argmax[i * c_out..(i + 1) * c_out];
        for (s, &m) in graph.row(i).iter().enumerate() {
            let bm = &b[m as usize * c_out..(m as usize + 1) * c_out];
            for ch in 0..c_out {
                let v = ai[ch] + bm[ch];
                if s == 0 || v > best[ch] {
                    best[ch] = v;
                    arg[ch] = s as u16;
                }
            }
        }
        relu_in_place(best);
    }
    Ok(EdgeConvCache { graph, argmax, out })
}

/// Backward of [`edgeconv_forward`]: gradient flows only through the
/// recorded argmax neighbor of each positive output.
pub fn edgeconv_backward<F: Scalar>(
    x: &[F],
    c: usize,
    layer: &Linear<'_, F>,
    cache: &EdgeConvCache<F>,
    dout: &[F],
    grad: LinearGrad<'_, F>,
    want_dx: bool,
) -> Result<Option<Vec<F>>> {
    let (_, delta, ew) = split_edge_weight(layer, c)?;
    let n = cache.graph.n();
    let c_out = layer.c_out;
    let mut da = vec![F::zero(); n * c_out];
    let mut db = vec![F::zero(); n * c_out];
    for i in 0..n {
        let row = cache.graph.row(i);
        for ch in 0..c_out {
            let idx = i * c_out + ch;
            if !(cache.out[idx] > F::zero()) {
                continue;
            }
            let g = dout[idx];
            da[idx] = da[idx] + g;
            let m = row[cache.argmax[idx] as usize] as usize;
            db[m * c_out + ch] = db[m * c_out + ch] + g;
        }
    }
    Ok(edge_weight_backward(x, c, c_out, delta, &ew, &da, &db, grad, want_dx))
}

/// Max over groups of `group` consecutive rows: `(n*group) x c -> n x c`.
pub fn group_max<F: Scalar>(x: &[F], n: usize, group: usize, c: usize) -> (Vec<F>, Vec<u16>) {
    let mut out = vec![F::zero(); n * c];
    let mut arg = vec![0u16; n * c];
    for i in 0..n {
        let o = &mut out[i * c..(i + 1) * c];
        let a = &mut arg[i * c..(i + 1) * c];
        for s in 0..group {
            let row = &x[(i * group + s) * c..(i * group + s + 1) * c];
            for ch in 0..c {
                if s == 0 || row[ch] > o[ch] {
                    o[ch] = row[ch];
                    a[ch] = s as u16;
                }
            }
        }
    }
    (out, arg)
}

pub fn group_max_backward<F: Scalar>(arg: &[u16], n: usize, group: usize, c: usize, dout: &[F]) -> Vec<F> {
    let mut dx = vec![F::zero(); n * group * c];
    for i in 0..n {
        for ch in 0..c {
            let s = arg[i * c + ch] as usize;
            dx[(i * group + s) * c + ch] = dout[i * c + ch];
        }
    }
    dx
}

/// Column-wise max over all rows: `rows x c -> c`, with the winning row.
pub fn global_max_pool<F: Scalar>(x: &[F], rows: usize, c: usize) -> (Vec<F>, Vec<u32>) {
    let mut out = vec![F::neg_infinity(); c];
    let mut arg = vec![0u32; c];
    for (r, row) in x.chunks_exact(c).take(rows).enumerate() {
        for ch in 0..c {
            if row[ch] > out[ch] {
                out[ch] = row[ch];
                arg[ch] = r as u32;
            }
        }
    }
    (out, arg)
}

/// Adds the pooled gradient into the winning rows of `dx`.
pub fn global_max_pool_backward<F: Scalar>(arg: &[u32], c: usize, dpool: &[F], dx: &mut [F]) {
    for ch in 0..c {
        let idx = arg[ch] as usize * c + ch;
        dx[idx] = dx[idx] + dpool[ch];
    }
}

/// Row-vector transform `p -> p T` for every row of an `n x 3` buffer.
pub fn apply_transform<F: Scalar>(points: &[F], t: &[F; 9]) -> Vec<F> {
    let mut out = Vec::with_capacity(points.len());
    for p in points.chunks_exact(3) {
        for col in 0..3 {
            out.push(p[0] * t[col] + p[1] * t[3 + col] + p[2] * t[6 + col]);
        }
    }
    out
}

/// `dT = P^T dY`.
pub fn apply_transform_backward<F: Scalar>(points: &[F], dy: &[F]) -> [F; 9] {
    let mut dt = [F::zero(); 9];
    for (p, g) in points.chunks_exact(3).zip(dy.chunks_exact(3)) {
        for a in 0..3 {
            for b in 0..3 {
                dt[a * 3 + b] = dt[a * 3 + b] + p[a] * g[b];
            }
        }
    }
    dt
}
