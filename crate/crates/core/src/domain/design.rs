use super::{zonotope::point_in_polygon, ReducedDomain};
use crate::error::{Error, Result};

/// Gaussian designs span ±3 standard deviations per reduced coordinate.
pub const DESIGN_HALF_WIDTH: f64 = 3.0;
pub const DEFAULT_POINTS_PER_DIM: usize = 5;

/// `k^n` tensor grid on `[-half_width, half_width]^n`, first coordinate slowest.
pub fn tensor_points(n: usize, k: usize, half_width: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..k)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (k - 1) as f64)
        .collect();
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

/// Tensor-product design on the Gaussian reduced domain.
pub fn tensor_design(domain: &ReducedDomain, points_per_dim: usize) -> Result<Vec<Vec<f64>>> {
    if domain.is_zonotope() {
        return Err(Error::Unsupported(
            "tensor designs are defined for the Gaussian reduced domain; use a zonotope design".into(),
        ));
    }
    if points_per_dim < 2 {
        return Err(Error::OutOfRange {
            name: "points_per_dim",
            value: points_per_dim as f64,
            expected: "at least 2".into(),
        });
    }
    Ok(tensor_points(domain.n(), points_per_dim, DESIGN_HALF_WIDTH))
}

/// Regular grid over the zonotope's bounding box, clipped to the zonotope,
/// plus its vertices.
pub fn zonotope_design(domain: &ReducedDomain, spacing: f64) -> Result<Vec<Vec<f64>>> {
    let Some(vertices) = domain.vertices() else {
        return Err(Error::Unsupported("zonotope designs need a uniform input domain".into()));
    };
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::OutOfRange {
            name: "spacing",
            value: spacing,
            expected: "spacing > 0".into(),
        });
    }
    let n = domain.n();
    let lo: Vec<f64> = (0..n).map(|d| vertices.iter().map(|v| v[d]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..n).map(|d| vertices.iter().map(|v| v[d]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let axis = |d: usize| -> Vec<f64> {
        let steps = ((hi[d] - lo[d]) / spacing + 1e-9).floor() as usize;
        (0..=steps).map(|i| lo[d] + i as f64 * spacing).collect()
    };
    let tol = 1e-10;
    let mut points: Vec<Vec<f64>> = match n {
        1 => axis(0).into_iter().map(|v| vec![v]).collect(),
        2 => {
            let (ax, ay) = (axis(0), axis(1));
            ax.iter()
                .flat_map(|&x| ay.iter().map(move |&y| vec![x, y]))
                .filter(|p| point_in_polygon(vertices, p, tol))
                .collect()
        }
        _ => unreachable!("zonotope domains have n <= 2"),
    };
    for v in vertices {
        let present = points
            .iter()
            .any(|p| p.iter().zip(v).all(|(a, b)| (a - b).abs() <= tol));
        if !present {
            points.push(v.clone());
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::InputDomain;
    use crate::subspace::ActiveSubspace;
    use nalgebra::DMatrix;

    fn identity_domain(m: usize, n: usize, uniform: bool) -> ReducedDomain {
        let sub = ActiveSubspace::from_parts(DMatrix::identity(m, m), vec![1.0; m], n).unwrap();
        let input = if uniform { InputDomain::uniform(m) } else { InputDomain::gaussian(m) };
        ReducedDomain::new(input, sub).unwrap()
    }

    #[test]
    fn tensor_design_examples() {
        let d1 = identity_domain(3, 1, false);
        assert_eq!(tensor_design(&d1, 3).unwrap(), vec![vec![-3.0], vec![0.0], vec![3.0]]);
        assert_eq!(
            tensor_design(&d1, 5).unwrap(),
            vec![vec![-3.0], vec![-1.5], vec![0.0], vec![1.5], vec![3.0]]
        );
        let d2 = identity_domain(3, 2, false);
        let nine = tensor_design(&d2, 3).unwrap();
        assert_eq!(nine.len(), 9);
        for a in [-3.0, 0.0, 3.0] {
            for b in [-3.0, 0.0, 3.0] {
                assert!(nine.contains(&vec![a, b]));
            }
        }
        assert!(tensor_design(&d1, 1).is_err());
        assert!(matches!(tensor_design(&identity_domain(3, 1, true), 3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zonotope_design_examples() {
        let d1 = identity_domain(3, 1, true);
        assert_eq!(zonotope_design(&d1, 1.0).unwrap(), vec![vec![-1.0], vec![0.0], vec![1.0]]);
        let d2 = identity_domain(3, 2, true);
        let pts = zonotope_design(&d2, 1.0).unwrap();
        assert_eq!(pts.len(), 9);
        assert!(zonotope_design(&d2, 0.0).is_err());
        assert!(zonotope_design(&identity_domain(3, 1, false), 1.0).is_err());
    }
}
