use nalgebra::DMatrix;

use super::{DensityKind, ReducedDomain};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEASIBILITY_TOL: f64 = 1e-9;

/// Map a reduced point back to the input space.
///
/// Gaussian inputs use `x = W1y`. Uniform inputs solve the feasibility
/// problem `W1ᵀx = y, -1 <= x <= 1` with a phase-1 simplex.
pub fn lift_point(domain: &ReducedDomain, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != domain.n() {
        return Err(Error::ShapeMismatch(format!(
            "reduced point has length {}, expected {}",
            y.len(),
            domain.n()
        )));
    }
    match domain.input().kind {
        DensityKind::GaussianStandard => Ok(domain.combine(y, &[])),
        DensityKind::UniformHypercube => solve_box_feasibility(domain.w1(), y, 1.0),
    }
}

/// Find `x` with `W1ᵀx = y` and `|x_i| <= bound`.
///
/// Substituting `u = x + bound` gives `W1ᵀu = y + bound·W1ᵀ1` with
/// `0 <= u <= 2·bound`; the upper bounds become slack rows whose slacks form
/// the initial basis, so only the `n` equality rows carry artificials.
/// Bland's rule prevents cycling.
pub fn solve_box_feasibility(w1: &DMatrix<f64>, y: &[f64], bound: f64) -> Result<Vec<f64>> {
    let (m, n) = (w1.nrows(), w1.ncols());
    let rows = n + m;
    // Columns: u (m), s (m), artificials (n), rhs.
    let cols = 2 * m + n;
    let rhs_col = cols;
    let mut t = vec![vec![0.0; cols + 1]; rows];
    for j in 0..n {
        let mut r = y[j];
        for i in 0..m {
            r += bound * w1[(i, j)];
        }
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            t[j][i] = sign * w1[(i, j)];
        }
        t[j][2 * m + j] = 1.0;
        t[j][rhs_col] = sign * r;
    }
    for i in 0..m {
        let row = n + i;
        t[row][i] = 1.0;
        t[row][m + i] = 1.0;
        t[row][rhs_col] = 2.0 * bound;
    }
    let mut basis: Vec<usize> = (0..n).map(|j| 2 * m + j).chain((0..m).map(|i| m + i)).collect();

    // Phase-1 objective: minimize the sum of artificials, expressed in the
    // non-basic columns.
    let mut cost = vec![0.0; cols + 1];
    for row in t.iter().take(n) {
        for (c, v) in cost.iter_mut().zip(row) {
            *c -= v;
        }
    }
    for j in 0..n {
        cost[2 * m + j] = 0.0;
    }

    let max_iter = 50 * (rows + cols);
    for _ in 0..max_iter {
        let Some(enter) = (0..cols).find(|&c| cost[c] < -PIVOT_TOL) else {
            break;
        };
        let min_ratio = t
            .iter()
            .filter(|row| row[enter] > PIVOT_TOL)
            .map(|row| row[rhs_col] / row[enter])
            .fold(f64::INFINITY, f64::min);
        let leave = (0..rows)
            .filter(|&r| t[r][enter] > PIVOT_TOL && t[r][rhs_col] / t[r][enter] <= min_ratio + 1e-14)
            .min_by_key(|&r| basis[r])
            .map(|r| (r, min_ratio));
        let Some((pr, _)) = leave else {
            return Err(Error::Solver("phase-1 objective unbounded below".into()));
        };
        pivot(&mut t, &mut cost, pr, enter);
        basis[pr] = enter;
    }

    let infeasibility = -cost[rhs_col];
    let scale = 1.0 + y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if infeasibility > FEASIBILITY_TOL * scale {
        return Err(Error::Infeasible(format!(
            "no x in [-{bound}, {bound}]^{m} projects to y = {y:?} (residual {infeasibility:e})"
        )));
    }
    let mut u = vec![0.0; m];
    for (r, &b) in basis.iter().enumerate() {
        if b < m {
            u[b] = t[r][rhs_col];
        }
    }
    Ok(u.into_iter().map(|v| (v - bound).clamp(-bound, bound)).collect())
}

fn pivot(t: &mut [Vec<f64>], cost: &mut [f64], pr: usize, pc: usize) {
    let p = t[pr][pc];
    for v in t[pr].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[pr].clone();
    for (r, row) in t.iter_mut().enumerate() {
        if r == pr {
            continue;
        }
        let f = row[pc];
        if f != 0.0 {
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
    }
    let f = cost[pc];
    if f != 0.0 {
        for (v, pv) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::InputDomain;
    use crate::subspace::ActiveSubspace;
    use nalgebra::Rotation3;

    fn domain(w: DMatrix<f64>, n: usize, uniform: bool) -> ReducedDomain {
        let m = w.nrows();
        let sub = ActiveSubspace::from_parts(w, vec![1.0; m], n).unwrap();
        let input = if uniform { InputDomain::uniform(m) } else { InputDomain::gaussian(m) };
        ReducedDomain::new(input, sub).unwrap()
    }

    #[test]
    fn gaussian_lift_is_w1_y() {
        let s = 0.58_f64.sqrt();
        let w = DMatrix::from_row_slice(2, 2, &[0.7 / s, -0.3 / s, 0.3 / s, 0.7 / s]);
        let d = domain(w, 1, false);
        assert_eq!(lift_point(&d, &[0.0]).unwrap(), vec![0.0, 0.0]);
        let x = lift_point(&d, &[1.0]).unwrap();
        assert!((x[0] - 0.9191).abs() < 1e-4 && (x[1] - 0.3939).abs() < 1e-4);
    }

    #[test]
    fn uniform_lift_satisfies_constraints() {
        let d = domain(DMatrix::identity(3, 3), 1, true);
        let x = lift_point(&d, &[0.5]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert!(x.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn uniform_lift_on_rotated_cube() {
        let r = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let w = DMatrix::from_fn(3, 3, |i, j| r.matrix()[(i, j)]);
        let d = domain(w, 2, true);
        for v in d.vertices().unwrap().to_vec() {
            for scale in [0.0, 0.5, 0.999, 1.0] {
                let y: Vec<f64> = v.iter().map(|c| c * scale).collect();
                let x = lift_point(&d, &y).unwrap();
                let back = d.project(&x);
                assert!(back.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-8));
                assert!(x.iter().all(|c| c.abs() <= 1.0));
            }
            let outside: Vec<f64> = v.iter().map(|c| c * 1.05).collect();
            assert!(matches!(lift_point(&d, &outside), Err(Error::Infeasible(_))));
        }
    }
}
