//! `-∇·(a ∇u) = 1` on `[0,1]²` with `u = 0` on the left, top and bottom
//! edges and zero flux on the right edge. The quantity of interest is the
//! mean of `u` over the right edge; `log a` is a truncated KL expansion with
//! standard-normal coefficients.
//!
//! Discretization: nodal unknowns on a regular `q × q` grid, piecewise
//! constant coefficient per cell, five-point finite-volume stencil. Each
//! cell contributes conductance `a_c / 2` to each of its four edges, so the
//! stiffness matrix is linear in the cell coefficients and symmetric by
//! construction.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;

use super::kl::{load_or_decompose, KlExpansion};
use super::{check_dim, ModelFunction};
use crate::domain::DensityKind;
use crate::error::{Error, Result};

pub const DEFAULT_GRID: usize = 33;

/// `|log a|` beyond this is rejected instead of overflowing.
pub const LOG_COEFFICIENT_LIMIT: f64 = 50.0;

const MIN_MODEL_GRID: usize = 17;

/// Node grid geometry, assembly and the banded SPD solver.
#[derive(Clone, Debug)]
pub struct FlowGrid {
    q: usize,
}

/// Assembled linear system `K u = f` and the QoI weights `Mc` (`f(x) = (Mc)ᵀu`).
#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    unknowns: usize,
    /// Both triangles of `K` as (row, col, value), duplicates summed on use.
    triplets: Vec<(usize, usize, f64)>,
    band: BandedSpd,
    pub load: Vec<f64>,
    pub qoi_weights: Vec<f64>,
}

impl DiscreteSystem {
    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    pub fn stiffness_dense(&self) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.unknowns, self.unknowns);
        for &(r, c, v) in &self.triplets {
            k[(r, c)] += v;
        }
        k
    }
}

impl FlowGrid {
    pub fn new(q: usize) -> Result<Self> {
        if q < 3 {
            return Err(Error::invalid("flow grid needs at least 3 nodes per side"));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.q - 1) as f64
    }

    pub fn cells(&self) -> usize {
        (self.q - 1) * (self.q - 1)
    }

    pub fn unknowns(&self) -> usize {
        (self.q - 1) * (self.q - 2)
    }

    /// Unknown index of node `(i, j)`, or `None` on the Dirichlet boundary.
    pub fn unknown(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || j == 0 || j == self.q - 1 {
            None
        } else {
            Some((j - 1) * (self.q - 1) + (i - 1))
        }
    }

    fn cell_edges(&self, cell: usize) -> [(Option<usize>, Option<usize>); 4] {
        let (ci, cj) = (cell % (self.q - 1), cell / (self.q - 1));
        let n = |i, j| self.unknown(i, j);
        [
            (n(ci, cj), n(ci + 1, cj)),
            (n(ci, cj + 1), n(ci + 1, cj + 1)),
            (n(ci, cj), n(ci, cj + 1)),
            (n(ci + 1, cj), n(ci + 1, cj + 1)),
        ]
    }

    /// Assemble `K`, the load and the QoI weights for cell coefficients `a`.
    pub fn assemble(&self, coefficients: &[f64]) -> Result<DiscreteSystem> {
        if coefficients.len() != self.cells() {
            return Err(Error::ShapeMismatch(format!(
                "{} cell coefficients for {} cells",
                coefficients.len(),
                self.cells()
            )));
        }
        let q = self.q;
        let h = self.h();
        let unknowns = self.unknowns();
        let mut triplets = Vec::with_capacity(16 * self.cells());
        for (cell, &a) in coefficients.iter().enumerate() {
            let g = 0.5 * a;
            for (p, r) in self.cell_edges(cell) {
                if let Some(p) = p {
                    triplets.push((p, p, g));
                }
                if let Some(r) = r {
                    triplets.push((r, r, g));
                }
                if let (Some(p), Some(r)) = (p, r) {
                    triplets.push((p, r, -g));
                    triplets.push((r, p, -g));
                }
            }
        }
        let mut band = BandedSpd::zeros(unknowns, q - 1);
        for &(r, c, v) in &triplets {
            if c <= r {
                band.add(r, c, v);
            }
        }
        let mut load = vec![0.0; unknowns];
        let mut qoi_weights = vec![0.0; unknowns];
        for j in 1..q - 1 {
            for i in 1..q {
                let idx = self.unknown(i, j).expect("interior or Neumann node");
                let cx = if i == q - 1 { 0.5 } else { 1.0 };
                load[idx] = h * h * cx;
                if i == q - 1 {
                    qoi_weights[idx] = h;
                }
            }
        }
        Ok(DiscreteSystem {
            unknowns,
            triplets,
            band,
            load,
            qoi_weights,
        })
    }

    /// `yᵀ (∂K/∂a_c) u` for every cell.
    fn cell_sensitivities(&self, u: &[f64], y: &[f64]) -> Vec<f64> {
        let val = |v: &[f64], n: Option<usize>| n.map_or(0.0, |k| v[k]);
        (0..self.cells())
            .map(|cell| {
                self.cell_edges(cell)
                    .iter()
                    .map(|&(p, r)| 0.5 * (val(y, p) - val(y, r)) * (val(u, p) - val(u, r)))
                    .sum()
            })
            .collect()
    }

    /// Quantity of interest for a given cell-wise `log a`.
    pub fn qoi_for_log_coefficient(&self, log_a: &[f64]) -> Result<f64> {
        let a = exp_guarded(log_a, f64::NAN)?;
        let sys = self.assemble(&a)?;
        let factor = sys.band.clone().factor()?;
        let u = factor.solve(&sys.load);
        Ok(dot(&sys.qoi_weights, &u))
    }
}

fn exp_guarded(log_a: &[f64], input_norm: f64) -> Result<Vec<f64>> {
    let worst = log_a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if !(worst <= LOG_COEFFICIENT_LIMIT) {
        return Err(Error::CoefficientOverflow {
            magnitude: worst,
            limit: LOG_COEFFICIENT_LIMIT,
            input_norm,
        });
    }
    Ok(log_a.iter().map(|v| v.exp()).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The elliptic model as a function of the `m` KL coefficients.
pub struct EllipticModel {
    grid: FlowGrid,
    kl: KlExpansion,
    /// `γ_i φ_i` averaged over each cell's four corners, cells × m.
    cell_modes: DMatrix<f64>,
    solves: AtomicUsize,
}

impl EllipticModel {
    /// Build the model on a `q × q` grid with correlation length `beta` and
    /// `m` KL terms, reusing a cached decomposition from `cache_dir` if given.
    pub fn new(q: usize, beta: f64, m: usize, cache_dir: Option<&Path>) -> Result<Self> {
        if q < MIN_MODEL_GRID {
            return Err(Error::OutOfRange {
                name: "q",
                value: q as f64,
                expected: format!("q >= {MIN_MODEL_GRID}"),
            });
        }
        Self::from_expansion(load_or_decompose(cache_dir, q, beta, m)?)
    }

    pub fn from_expansion(kl: KlExpansion) -> Result<Self> {
        let grid = FlowGrid::new(kl.q)?;
        let q = kl.q;
        let cells = grid.cells();
        let cell_modes = DMatrix::from_fn(cells, kl.len(), |cell, i| {
            let (ci, cj) = (cell % (q - 1), cell / (q - 1));
            let corners = [cj * q + ci, cj * q + ci + 1, (cj + 1) * q + ci, (cj + 1) * q + ci + 1];
            kl.values[i] * corners.iter().map(|&k| kl.modes[(k, i)]).sum::<f64>() / 4.0
        });
        Ok(Self {
            grid,
            kl,
            cell_modes,
            solves: AtomicUsize::new(0),
        })
    }

    pub fn grid(&self) -> &FlowGrid {
        &self.grid
    }

    pub fn expansion(&self) -> &KlExpansion {
        &self.kl
    }

    /// Linear solves performed so far (forward and adjoint).
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn log_coefficient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x, self.kl.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite KL coefficient"));
        }
        let mut log_a = vec![0.0; self.grid.cells()];
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for (slot, phi) in log_a.iter_mut().zip(self.cell_modes.column(i).iter()) {
                *slot += xi * phi;
            }
        }
        Ok(log_a)
    }

    fn coefficients(&self, x: &[f64]) -> Result<Vec<f64>> {
        let log_a = self.log_coefficient(x)?;
        exp_guarded(&log_a, x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    pub fn assemble_system(&self, x: &[f64]) -> Result<DiscreteSystem> {
        self.grid.assemble(&self.coefficients(x)?)
    }

    pub fn solve_qoi(&self, x: &[f64]) -> Result<f64> {
        let sys = self.assemble_system(x)?;
        let factor = sys.band.clone().factor()?;
        let u = factor.solve(&sys.load);
        self.solves.fetch_add(1, Ordering::Relaxed);
        Ok(dot(&sys.qoi_weights, &u))
    }

    /// Value and adjoint gradient: one factorization, one forward and one
    /// adjoint solve, then `∂f/∂x_i = -Σ_c yᵀ(∂K/∂a_c)u · a_c γ_i φ_i(c)`.
    pub fn gradient_adjoint(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let a = self.coefficients(x)?;
        let sys = self.grid.assemble(&a)?;
        let factor = sys.band.clone().factor()?;
        let u = factor.solve(&sys.load);
        // K is symmetric, so the adjoint reuses the factorization.
        let y = factor.solve(&sys.qoi_weights);
        self.solves.fetch_add(2, Ordering::Relaxed);
        let sens = self.grid.cell_sensitivities(&u, &y);
        let weighted: Vec<f64> = sens.iter().zip(&a).map(|(s, a)| -s * a).collect();
        let grad = (0..self.kl.len())
            .map(|i| dot(self.cell_modes.column(i).as_slice(), &weighted))
            .collect();
        Ok((dot(&sys.qoi_weights, &u), grad))
    }
}

impl ModelFunction for EllipticModel {
    fn dim(&self) -> usize {
        self.kl.len()
    }

    fn density(&self) -> DensityKind {
        DensityKind::GaussianStandard
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.solve_qoi(x)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gradient_adjoint(x)?.1)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.gradient_adjoint(x)
    }
}

/// Symmetric positive definite band matrix, lower band stored row by row.
#[derive(Clone, Debug)]
struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// In-place band Cholesky `K = L Lᵀ`.
    fn factor(mut self) -> Result<BandedSpd> {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let mut sum = self.data[self.idx(i, j)];
                let kmin = lo.max(j.saturating_sub(self.bw));
                for k in kmin..j {
                    sum -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Solver(format!("non-positive pivot {sum:e} at row {i}")));
                    }
                    let k = self.idx(i, i);
                    self.data[k] = sum.sqrt();
                } else {
                    let k = self.idx(i, j);
                    self.data[k] = sum / self.data[self.idx(j, j)];
                }
            }
        }
        Ok(self)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.data[self.idx(i, k)] * x[k];
            }
            x[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..self.n).rev() {
            let hi = (i + self.bw).min(self.n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.data[self.idx(k, i)] * x[k];
            }
            x[i] = s / self.data[self.idx(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    /// Constant-coefficient five-point operator written out node by node.
    fn reference_laplacian(q: usize) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let grid = FlowGrid::new(q).unwrap();
        let h = grid.h();
        let n = grid.unknowns();
        let mut k = DMatrix::zeros(n, n);
        let mut f = DVector::zeros(n);
        let mut c = DVector::zeros(n);
        for j in 1..q - 1 {
            for i in 1..q {
                let p = grid.unknown(i, j).unwrap();
                let right_edge = i == q - 1;
                // Horizontal faces have full height h; vertical faces are halved on the Neumann edge.
                let vertical_face = if right_edge { 0.5 } else { 1.0 };
                let mut couple = |ni: usize, nj: usize, g: f64| {
                    k[(p, p)] += g;
                    if let Some(r) = grid.unknown(ni, nj) {
                        k[(p, r)] -= g;
                    }
                };
                couple(i - 1, j, 1.0);
                if !right_edge {
                    couple(i + 1, j, 1.0);
                }
                couple(i, j - 1, vertical_face);
                couple(i, j + 1, vertical_face);
                f[p] = h * h * vertical_face;
                if right_edge {
                    c[p] = h;
                }
            }
        }
        (k, f, c)
    }

    #[test]
    fn unit_coefficient_matches_dense_reference() {
        let q = 17;
        let grid = FlowGrid::new(q).unwrap();
        let sys = grid.assemble(&vec![1.0; grid.cells()]).unwrap();
        let (k, f, c) = reference_laplacian(q);
        assert!((sys.stiffness_dense() - &k).amax() < 1e-14);
        let u = k.cholesky().unwrap().solve(&f);
        let reference = c.dot(&u);
        let qoi = grid.qoi_for_log_coefficient(&vec![0.0; grid.cells()]).unwrap();
        assert!(reference > 0.0);
        assert!((qoi - reference).abs() <= 1e-10 * reference.abs(), "{qoi} vs {reference}");
    }

    #[test]
    fn stiffness_is_exactly_symmetric() {
        let grid = FlowGrid::new(9).unwrap();
        let a: Vec<f64> = (0..grid.cells()).map(|c| 1.0 + (c as f64 * 0.37).sin().abs()).collect();
        let k = grid.assemble(&a).unwrap().stiffness_dense();
        assert_eq!(&k - k.transpose(), DMatrix::zeros(k.nrows(), k.ncols()));
        assert!(k.cholesky().is_some());
    }

    #[test]
    fn doubling_coefficient_halves_qoi() {
        let grid = FlowGrid::new(17).unwrap();
        let log_a: Vec<f64> = (0..grid.cells()).map(|c| 0.3 * (c as f64 * 0.11).cos()).collect();
        let shifted: Vec<f64> = log_a.iter().map(|v| v + 2f64.ln()).collect();
        let f = grid.qoi_for_log_coefficient(&log_a).unwrap();
        let g = grid.qoi_for_log_coefficient(&shifted).unwrap();
        assert!((g - f / 2.0).abs() <= 1e-8 * f.abs());
    }

    #[test]
    fn grid_refinement_converges_monotonically() {
        let qoi = |q: usize| {
            let g = FlowGrid::new(q).unwrap();
            g.qoi_for_log_coefficient(&vec![0.0; g.cells()]).unwrap()
        };
        let values: Vec<f64> = [9, 17, 33, 65, 129].iter().map(|&q| qoi(q)).collect();
        let diffs: Vec<f64> = values.windows(2).map(|p| (p[0] - p[1]).abs()).collect();
        assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{diffs:?}");
    }

    #[test]
    fn overflow_guard_names_magnitude() {
        let grid = FlowGrid::new(5).unwrap();
        let err = grid.qoi_for_log_coefficient(&vec![60.0; grid.cells()]).unwrap_err();
        assert!(matches!(err, Error::CoefficientOverflow { magnitude, .. } if magnitude == 60.0));
    }

    #[test]
    fn band_solver_matches_dense() {
        let grid = FlowGrid::new(6).unwrap();
        let a: Vec<f64> = (0..grid.cells()).map(|c| 0.5 + c as f64 / 10.0).collect();
        let sys = grid.assemble(&a).unwrap();
        let dense = sys.stiffness_dense().cholesky().unwrap().solve(&DVector::from_column_slice(&sys.load));
        let banded = sys.band.clone().factor().unwrap().solve(&sys.load);
        for (x, y) in dense.iter().zip(&banded) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
