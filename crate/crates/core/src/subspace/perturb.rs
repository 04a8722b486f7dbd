use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{aligned_distance, ActiveSubspace};
use crate::error::{Error, Result};
use crate::linalg::seeded_rng;

const MAX_BISECTIONS: usize = 200;

/// Rotate `W` by a seeded product of Givens rotations, each mixing one active
/// column with one inactive column, scaled so that the aligned distance to
/// `W` lands in `[0.9ε, ε]`. Eigenvalues are carried over unchanged.
pub fn perturb_subspace(subspace: &ActiveSubspace, epsilon: f64, seed: u64) -> Result<ActiveSubspace> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            expected: "0 <= epsilon <= 0.5".into(),
        });
    }
    if epsilon == 0.0 {
        return Ok(subspace.clone());
    }
    let (m, n) = (subspace.m(), subspace.n());
    let mut rng = seeded_rng(seed, 0);
    let pairs = n.min(m - n).max(1);
    let rotations: Vec<(usize, usize, f64)> = (0..pairs)
        .map(|_| {
            let i = rng.random_range(0..n);
            let j = rng.random_range(n..m);
            let angle: f64 = rng.sample(StandardNormal);
            (i, j, if angle.abs() < 0.1 { 0.1f64.copysign(angle) } else { angle })
        })
        .collect();

    let w = subspace.w();
    let rotate = |t: f64| -> DMatrix<f64> {
        let mut out = w.clone();
        for &(i, j, angle) in &rotations {
            let (s, c) = (t * angle).sin_cos();
            let ci = out.column(i).into_owned();
            let cj = out.column(j).into_owned();
            out.set_column(i, &(&ci * c + &cj * s));
            out.set_column(j, &(&cj * c - &ci * s));
        }
        out
    };
    let distance = |t: f64| aligned_distance(w, &rotate(t));

    let (lo_target, hi_target) = (0.9 * epsilon, epsilon);
    let (mut lo, mut hi) = (0.0, epsilon);
    let mut d_hi = distance(hi);
    while d_hi <= hi_target {
        if (lo_target..=hi_target).contains(&d_hi) {
            return Ok(subspace.with_basis(rotate(hi)));
        }
        lo = hi;
        hi *= 2.0;
        d_hi = distance(hi);
        if hi > 1e3 {
            return Err(Error::Degenerate("rotation never reached the requested distance".into()));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let d = distance(mid);
        if d > hi_target {
            hi = mid;
        } else if d < lo_target {
            lo = mid;
        } else {
            return Ok(subspace.with_basis(rotate(mid)));
        }
    }
    Err(Error::Degenerate("bisection on the rotation angle did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;
    use crate::subspace::subspace_distance;

    fn base(m: usize, n: usize) -> ActiveSubspace {
        let eig = (0..m).map(|i| 1.0 / (1.0 + i as f64)).collect();
        ActiveSubspace::from_parts(DMatrix::identity(m, m), eig, n).unwrap()
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let s = base(4, 1);
        assert_eq!(perturb_subspace(&s, 0.0, 7).unwrap(), s);
    }

    #[test]
    fn lands_in_bracket_and_depends_on_seed() {
        let s = base(6, 2);
        let a = perturb_subspace(&s, 0.1, 1).unwrap();
        let b = perturb_subspace(&s, 0.1, 2).unwrap();
        for p in [&a, &b] {
            let d = subspace_distance(s.w(), p.w()).unwrap();
            assert!((0.09..=0.1).contains(&d), "distance {d}");
            assert!(orthonormality_defect(p.w()) < 1e-12);
            assert_eq!(p.eigenvalues(), s.eigenvalues());
        }
        assert_ne!(a.w(), b.w());
        assert_eq!(perturb_subspace(&s, 0.1, 1).unwrap(), a);
    }

    #[test]
    fn rejects_large_epsilon() {
        assert!(perturb_subspace(&base(3, 1), 0.6, 0).is_err());
        assert!(perturb_subspace(&base(3, 1), -0.1, 0).is_err());
    }
}
