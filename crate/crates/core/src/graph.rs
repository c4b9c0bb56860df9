//! k-nearest-neighbor graphs and EdgeConv edge features.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// `n x k` neighbor table. Rows are sorted by ascending distance with ties
/// broken by ascending index; a point is never its own neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborIndex {
    n: usize,
    k: usize,
    indices: Vec<u32>,
}

impl NeighborIndex {
    pub fn from_rows(n: usize, k: usize, indices: Vec<u32>) -> Result<Self> {
        if indices.len() != n * k {
            return Err(Error::Shape(format!(
                "neighbor table has {} entries, expected {n}x{k}",
                indices.len()
            )));
        }
        if let Some(bad) = indices.iter().find(|&&i| i as usize >= n) {
            return Err(Error::Shape(format!("neighbor index {bad} out of range for {n} points")));
        }
        Ok(Self { n, k, indices })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }
}

/// Exact kNN over the rows of an `n x d` row-major buffer.
pub fn knn<F: Scalar>(features: &[F], n: usize, d: usize, k: usize) -> Result<NeighborIndex> {
    if features.len() != n * d {
        return Err(Error::Shape(format!(
            "feature buffer has {} values, expected {n}x{d}",
            features.len()
        )));
    }
    if k == 0 || n <= k {
        return Err(Error::InvalidArgument(format!(
            "kNN needs n > k >= 1 (n={n}, k={k})"
        )));
    }
    let mut indices = Vec::with_capacity(n * k);
    let mut cand: Vec<(F, u32)> = Vec::with_capacity(n);
    for i in 0..n {
        let xi = &features[i * d..(i + 1) * d];
        cand.clear();
        for j in 0..n {
            if j == i {
                continue;
            }
            let xj = &features[j * d..(j + 1) * d];
            let mut acc = F::zero();
            for (a, b) in xi.iter().zip(xj) {
                let t = *a - *b;
                acc = acc + t * t;
            }
            cand.push((acc, j as u32));
        }
        let cmp = |a: &(F, u32), b: &(F, u32)| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
        };
        cand.select_nth_unstable_by(k - 1, cmp);
        let head = &mut cand[..k];
        head.sort_unstable_by(cmp);
        indices.extend(head.iter().map(|c| c.1));
    }
    Ok(NeighborIndex { n, k, indices })
}

/// `n x k x 2d` tensor whose entry `(i, j)` is `[x_i, x_nbr(i,j) - x_i]`.
pub fn edge_features<F: Scalar>(features: &[F], n: usize, d: usize, nbr: &NeighborIndex) -> Result<Vec<F>> {
    if features.len() != n * d || nbr.n() != n {
        return Err(Error::Shape(format!(
            "edge features: {} values for {n}x{d}, graph over {} points",
            features.len(),
            nbr.n()
        )));
    }
    let k = nbr.k();
    let mut out = Vec::with_capacity(n * k * 2 * d);
    for i in 0..n {
        let xi = &features[i * d..(i + 1) * d];
        for &j in nbr.row(i) {
            let xj = &features[j as usize * d..(j as usize + 1) * d];
            out.extend_from_slice(xi);
            out.extend(xj.iter().zip(xi).map(|(b, a)| *b - *a));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_of_three() {
        let x = [0.0f32, 1.0, 3.0];
        let g = knn(&x, 3, 1, 1).unwrap();
        assert_eq!(g.indices(), &[1, 0, 1]);
    }

    #[test]
    fn ties_go_to_lower_index() {
        // point 1 sits between 0 and 2
        let x = [0.0f32, 1.0, 2.0];
        assert_eq!(knn(&x, 3, 1, 1).unwrap().row(1), &[0]);
        let sq = [0.0f64, 0.0, 1.0, 0.0, 0.0, 1.0, -1.0, 0.0];
        assert_eq!(knn(&sq, 4, 2, 2).unwrap().row(0), &[1, 2]);
    }

    #[test]
    fn requires_more_points_than_k() {
        assert!(knn(&[0.0f32, 1.0], 2, 1, 2).is_err());
        assert!(knn(&[0.0f32, 1.0], 2, 1, 0).is_err());
        assert!(knn(&[0.0f32], 2, 1, 1).is_err());
    }

    #[test]
    fn edge_feature_layout() {
        let x = [0.0f32, 0.0, 0.0, 1.0, 0.0, 0.0];
        let g = knn(&x, 2, 3, 1).unwrap();
        let e = edge_features(&x, 2, 3, &g).unwrap();
        assert_eq!(&e[..6], &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(&e[6..], &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn duplicate_neighbor_gives_zero_difference() {
        let x = [0.5f32, 0.5, 0.5, 0.5, 9.0, 9.0];
        let g = knn(&x, 3, 2, 1).unwrap();
        let e = edge_features(&x, 3, 2, &g).unwrap();
        assert_eq!(&e[..4], &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn paper_scale_shape() {
        let n = 5000;
        let x: Vec<f32> = (0..n * 3).map(|i| ((i * 7919) % 1000) as f32 * 1e-3).collect();
        let g = NeighborIndex::from_rows(n, 16, (0..n * 16).map(|i| ((i / 16 + 1 + i % 16) % n) as u32).collect()).unwrap();
        assert_eq!(edge_features(&x, n, 3, &g).unwrap().len(), 5000 * 16 * 6);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let g = NeighborIndex::from_rows(2, 1, vec![1, 0]).unwrap();
        assert!(edge_features(&[0.0f32; 9], 3, 3, &g).is_err());
        assert!(NeighborIndex::from_rows(2, 1, vec![1, 2]).is_err());
    }
}
