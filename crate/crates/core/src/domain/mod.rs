//! Input densities and the reduced domain `{W1ᵀx : x ∈ X}`.

mod design;
mod lift;
mod sampling;
mod zonotope;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::ActiveSubspace;

pub use design::{tensor_design, tensor_points, zonotope_design, DEFAULT_POINTS_PER_DIM, DESIGN_HALF_WIDTH};
pub use lift::{lift_point, solve_box_feasibility};
pub use sampling::{sample_conditional_z, ChainDiagnostics, ConditionalDraws};
pub use zonotope::{point_in_polygon, zonotope_vertices};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    /// `R^m` with the standard normal density.
    GaussianStandard,
    /// `[-1, 1]^m` with the uniform density.
    UniformHypercube,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDomain {
    pub kind: DensityKind,
    pub m: usize,
}

impl InputDomain {
    pub fn gaussian(m: usize) -> Self {
        Self {
            kind: DensityKind::GaussianStandard,
            m,
        }
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            kind: DensityKind::UniformHypercube,
            m,
        }
    }

    /// Default Poincaré constant: 1 for the standard Gaussian, `2√m/π` for
    /// the uniform hypercube.
    pub fn poincare_constant(&self) -> f64 {
        match self.kind {
            DensityKind::GaussianStandard => 1.0,
            DensityKind::UniformHypercube => 2.0 * (self.m as f64).sqrt() / std::f64::consts::PI,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.m
            && match self.kind {
                DensityKind::GaussianStandard => x.iter().all(|v| v.is_finite()),
                DensityKind::UniformHypercube => x.iter().all(|v| (-1.0..=1.0).contains(v)),
            }
    }
}

/// Reduced domain for a given input density and subspace partition.
#[derive(Clone, Debug)]
pub struct ReducedDomain {
    input: InputDomain,
    subspace: ActiveSubspace,
    w1: DMatrix<f64>,
    w2: DMatrix<f64>,
    vertices: Option<Vec<Vec<f64>>>,
}

impl ReducedDomain {
    /// Build the reduced domain. For the uniform hypercube the zonotope
    /// vertices are enumerated eagerly, so `n` must be 1 or 2 there.
    pub fn new(input: InputDomain, subspace: ActiveSubspace) -> Result<Self> {
        if input.m != subspace.m() {
            return Err(Error::ShapeMismatch(format!(
                "input dimension {} vs subspace dimension {}",
                input.m,
                subspace.m()
            )));
        }
        let w1 = subspace.w1();
        let w2 = subspace.w2();
        let vertices = match input.kind {
            DensityKind::GaussianStandard => None,
            DensityKind::UniformHypercube => Some(zonotope_vertices(&w1)?),
        };
        Ok(Self {
            input,
            subspace,
            w1,
            w2,
            vertices,
        })
    }

    pub fn input(&self) -> InputDomain {
        self.input
    }

    pub fn subspace(&self) -> &ActiveSubspace {
        &self.subspace
    }

    pub fn w1(&self) -> &DMatrix<f64> {
        &self.w1
    }

    pub fn w2(&self) -> &DMatrix<f64> {
        &self.w2
    }

    pub fn m(&self) -> usize {
        self.input.m
    }

    pub fn n(&self) -> usize {
        self.subspace.n()
    }

    /// Zonotope vertices (counterclockwise for n = 2); `None` in the Gaussian case.
    pub fn vertices(&self) -> Option<&[Vec<f64>]> {
        self.vertices.as_deref()
    }

    pub fn is_zonotope(&self) -> bool {
        self.vertices.is_some()
    }

    /// `y = W1ᵀx`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|j| self.w1.column(j).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `z = W2ᵀx`.
    pub fn project_inactive(&self, x: &[f64]) -> Vec<f64> {
        (0..self.w2.ncols())
            .map(|j| self.w2.column(j).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x = W1y + W2z`, clamped to the cube for uniform inputs so that
    /// roundoff at the zonotope boundary stays inside the domain.
    pub fn combine(&self, y: &[f64], z: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.m()];
        for (j, yj) in y.iter().enumerate() {
            for (xi, wij) in x.iter_mut().zip(self.w1.column(j).iter()) {
                *xi += wij * yj;
            }
        }
        for (j, zj) in z.iter().enumerate() {
            for (xi, wij) in x.iter_mut().zip(self.w2.column(j).iter()) {
                *xi += wij * zj;
            }
        }
        if self.input.kind == DensityKind::UniformHypercube {
            for v in x.iter_mut() {
                *v = v.clamp(-1.0, 1.0);
            }
        }
        x
    }

    /// Membership of `y` in the reduced domain, with absolute slack `tol`.
    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        if y.len() != self.n() || y.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.vertices {
            None => true,
            Some(v) if self.n() == 1 => {
                let hi = v[0][0].abs().max(v[1][0].abs());
                y[0].abs() <= hi + tol
            }
            Some(v) => point_in_polygon(v, y, tol),
        }
    }
}
