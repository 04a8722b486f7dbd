use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Generator rows shorter than this cannot move the boundary and are dropped.
const NEGLIGIBLE_GENERATOR: f64 = 1e-12;
const PARALLEL_TOL: f64 = 1e-12;

/// Vertices of the zonotope `{W1ᵀx : -1 <= x <= 1}` for `n ∈ {1, 2}`.
///
/// For `n = 1` the result is `[-s, s]` with `s = Σ|w_i|`. For `n = 2` the
/// generators (rows of `W1`) are folded into the upper half-plane, merged
/// when parallel, sorted by angle, and the boundary is walked from the
/// all-minus vertex, giving the vertices in counterclockwise order.
pub fn zonotope_vertices(w1: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
    match w1.ncols() {
        1 => {
            let s: f64 = w1.column(0).iter().map(|v| v.abs()).sum();
            Ok(vec![vec![-s], vec![s]])
        }
        2 => Ok(polygon_vertices(w1)),
        n => Err(Error::Unsupported(format!(
            "zonotope vertices are only enumerated for n <= 2 (got n = {n})"
        ))),
    }
}

fn polygon_vertices(w1: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let mut gens: Vec<(f64, [f64; 2])> = w1
        .row_iter()
        .map(|r| [r[0], r[1]])
        .filter(|g| g[0].hypot(g[1]) >= NEGLIGIBLE_GENERATOR)
        .map(|g| {
            let mut angle = g[1].atan2(g[0]);
            let mut g = g;
            if angle < 0.0 || angle >= std::f64::consts::PI {
                g = [-g[0], -g[1]];
                angle = g[1].atan2(g[0]);
                if angle >= std::f64::consts::PI || angle < 0.0 {
                    angle = 0.0;
                }
            }
            (angle, g)
        })
        .collect();
    gens.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut merged: Vec<(f64, [f64; 2])> = Vec::with_capacity(gens.len());
    for (angle, g) in gens {
        match merged.last_mut() {
            Some((last, acc)) if (angle - *last).abs() <= PARALLEL_TOL => {
                acc[0] += g[0];
                acc[1] += g[1];
            }
            _ => merged.push((angle, g)),
        }
    }
    if merged.is_empty() {
        return vec![vec![0.0, 0.0]];
    }

    let mut v = merged.iter().fold([0.0, 0.0], |acc, (_, g)| [acc[0] - g[0], acc[1] - g[1]]);
    let mut out = Vec::with_capacity(2 * merged.len());
    for sign in [2.0, -2.0] {
        for (_, g) in &merged {
            out.push(v.to_vec());
            v = [v[0] + sign * g[0], v[1] + sign * g[1]];
        }
    }
    out
}

/// Point-in-convex-polygon test for counterclockwise vertices, with absolute
/// slack `tol` on each edge's signed distance.
pub fn point_in_polygon(vertices: &[Vec<f64>], p: &[f64], tol: f64) -> bool {
    let k = vertices.len();
    if k < 3 {
        return vertices.iter().any(|v| (v[0] - p[0]).hypot(v[1] - p[1]) <= tol);
    }
    (0..k).all(|i| {
        let (a, b) = (&vertices[i], &vertices[(i + 1) % k]);
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let len = ex.hypot(ey);
        if len == 0.0 {
            return true;
        }
        (ex * (p[1] - a[1]) - ey * (p[0] - a[0])) / len >= -tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn signed_area(v: &[Vec<f64>]) -> f64 {
        (0..v.len())
            .map(|i| {
                let (a, b) = (&v[i], &v[(i + 1) % v.len()]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            / 2.0
    }

    #[test]
    fn axis_aligned_cases() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert_eq!(zonotope_vertices(&e1).unwrap(), vec![vec![-1.0], vec![1.0]]);
        let sq = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = zonotope_vertices(&sq).unwrap();
        assert_eq!(v.len(), 4);
        for corner in [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]] {
            assert!(v.iter().any(|p| p[0] == corner[0] && p[1] == corner[1]));
        }
        assert!((signed_area(&v) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn generic_cube_projection_has_six_vertices() {
        let r = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let m = r.matrix();
        let w1 = DMatrix::from_fn(3, 2, |i, j| m[(i, j)]);
        let v = zonotope_vertices(&w1).unwrap();
        assert_eq!(v.len(), 6);
        assert!(signed_area(&v) > 0.0);
        // Central symmetry and sign-vector images.
        for p in &v {
            assert!(v.iter().any(|q| (q[0] + p[0]).abs() < 1e-12 && (q[1] + p[1]).abs() < 1e-12));
            let hit = (0..8).any(|bits: u32| {
                let s: Vec<f64> = (0..3).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
                let img: Vec<f64> = (0..2).map(|j| (0..3).map(|i| w1[(i, j)] * s[i]).sum()).collect();
                (img[0] - p[0]).abs() < 1e-12 && (img[1] - p[1]).abs() < 1e-12
            });
            assert!(hit);
        }
    }

    #[test]
    fn negligible_and_parallel_generators() {
        let w1 = DMatrix::from_row_slice(4, 2, &[0.6, 0.0, 0.0, 0.6, 1e-14, 1e-14, 0.4, 0.0]);
        let v = zonotope_vertices(&w1).unwrap();
        assert_eq!(v.len(), 4);
        let rejected = DMatrix::from_element(4, 3, 0.5);
        assert!(matches!(zonotope_vertices(&rejected), Err(Error::Unsupported(_))));
    }

    #[test]
    fn polygon_membership() {
        let sq = vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![1.0, 1.0], vec![-1.0, 1.0]];
        assert!(point_in_polygon(&sq, &[0.0, 0.0], 0.0));
        assert!(point_in_polygon(&sq, &[1.0, 1.0], 0.0));
        assert!(!point_in_polygon(&sq, &[1.01, 0.0], 1e-9));
    }
}
