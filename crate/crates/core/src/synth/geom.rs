//! Small 3-vector and rotation helpers for the generator.

use crate::types::Point3;

pub(crate) type Mat3 = [[f64; 3]; 3];

pub(crate) const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub(crate) fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalized(a: Point3) -> Point3 {
    scale(a, 1.0 / norm(a))
}

pub(crate) fn mat_vec(m: &Mat3, v: Point3) -> Point3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub(crate) fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

/// Rodrigues rotation about a unit `axis`.
pub(crate) fn axis_angle(axis: Point3, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let [x, y, z] = axis;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// Two unit vectors completing `axis` to an orthonormal basis.
pub(crate) fn perpendicular_basis(axis: Point3) -> (Point3, Point3) {
    let helper = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = normalized(cross(axis, helper));
    (u, cross(axis, u))
}

/// Distance from `p` to the segment `[a, b]`.
pub(crate) fn segment_distance(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    norm(sub(p, add(a, scale(ab, t))))
}

/// Nearest positive hit of the unit-direction ray `o + t d` with a capsule.
pub(crate) fn ray_capsule(o: Point3, d: Point3, a: Point3, b: Point3, r: f64) -> Option<f64> {
    let ba = sub(b, a);
    let oa = sub(o, a);
    let baba = dot(ba, ba);
    let bard = dot(ba, d);
    let baoa = dot(ba, oa);
    let rdoa = dot(d, oa);
    let oaoa = dot(oa, oa);
    let qa = baba - bard * bard;
    let qb = baba * rdoa - baoa * bard;
    let qc = baba * oaoa - baoa * baoa - r * r * baba;
    let h = qb * qb - qa * qc;
    if h >= 0.0 && qa > 1e-12 {
        let t = (-qb - h.sqrt()) / qa;
        let y = baoa + t * bard;
        if y > 0.0 && y < baba && t > 0.0 {
            return Some(t);
        }
    }
    let mut best: Option<f64> = None;
    for center in [a, b] {
        if let Some(t) = ray_sphere(o, d, center, r) {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
    }
    best
}

pub(crate) fn ray_sphere(o: Point3, d: Point3, c: Point3, r: f64) -> Option<f64> {
    let oc = sub(o, c);
    let b = dot(oc, d);
    let h = b * b - (dot(oc, oc) - r * r);
    if h < 0.0 {
        return None;
    }
    let t = -b - h.sqrt();
    (t > 0.0).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_orthonormal() {
        let r = axis_angle(normalized([1.0, 2.0, -0.5]), 0.7);
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let p = mat_mul(&r, &rt);
        for i in 0..3 {
            for j in 0..3 {
                assert!((p[i][j] - IDENTITY[i][j]).abs() < 1e-12);
            }
        }
        let z = mat_vec(&axis_angle([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2), [1.0, 0.0, 0.0]);
        assert!((z[1] - 1.0).abs() < 1e-12 && z[0].abs() < 1e-12);
    }

    #[test]
    fn capsule_hits() {
        // capsule along x at z = 5, radius 0.5
        let (a, b) = ([-1.0, 0.0, 5.0], [1.0, 0.0, 5.0]);
        let t = ray_capsule([0.0; 3], [0.0, 0.0, 1.0], a, b, 0.5).unwrap();
        assert!((t - 4.5).abs() < 1e-12);
        // through the end cap
        let t = ray_capsule([1.2, 0.0, 0.0], [0.0, 0.0, 1.0], a, b, 0.5).unwrap();
        assert!((t - (5.0 - (0.25f64 - 0.04).sqrt())).abs() < 1e-12);
        assert!(ray_capsule([0.0; 3], [0.0, 1.0, 0.0], a, b, 0.5).is_none());
    }

    #[test]
    fn segment_distance_cases() {
        let (a, b) = ([0.0; 3], [1.0, 0.0, 0.0]);
        assert_eq!(segment_distance([0.5, 2.0, 0.0], a, b), 2.0);
        assert_eq!(segment_distance([-3.0, 0.0, 4.0], a, b), 5.0);
    }
}
