use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_dim, ModelFunction};
use crate::domain::DensityKind;
use crate::error::{Error, Result};
use crate::linalg::dot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeLink {
    Identity,
    Exp,
}

/// `f(x) = h(aᵀx)`.
#[derive(Clone, Debug)]
pub struct Ridge {
    a: Vec<f64>,
    link: RidgeLink,
    density: DensityKind,
}

pub fn make_ridge(a: Vec<f64>, link: RidgeLink) -> Result<Ridge> {
    if a.is_empty() || a.iter().all(|v| *v == 0.0) || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("ridge direction must be finite and nonzero"));
    }
    Ok(Ridge {
        a,
        link,
        density: DensityKind::GaussianStandard,
    })
}

impl Ridge {
    pub fn with_density(mut self, density: DensityKind) -> Self {
        self.density = density;
        self
    }

    pub fn direction(&self) -> &[f64] {
        &self.a
    }
}

impl ModelFunction for Ridge {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn density(&self) -> DensityKind {
        self.density
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.a.len())?;
        let t = dot(&self.a, x);
        Ok(match self.link {
            RidgeLink::Identity => t,
            RidgeLink::Exp => t.exp(),
        })
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x, self.a.len())?;
        let slope = match self.link {
            RidgeLink::Identity => 1.0,
            RidgeLink::Exp => dot(&self.a, x).exp(),
        };
        Ok(self.a.iter().map(|ai| slope * ai).collect())
    }
}

/// `f(x) = xᵀAx` with symmetric `A`.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    a: DMatrix<f64>,
    density: DensityKind,
}

pub fn make_quadratic_form(a: DMatrix<f64>) -> Result<QuadraticForm> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::ShapeMismatch("quadratic form needs a square matrix".into()));
    }
    let scale = a.amax().max(1.0);
    if (&a - a.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid("quadratic form matrix must be symmetric"));
    }
    Ok(QuadraticForm {
        a,
        density: DensityKind::GaussianStandard,
    })
}

impl QuadraticForm {
    pub fn with_density(mut self, density: DensityKind) -> Self {
        self.density = density;
        self
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl ModelFunction for QuadraticForm {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn density(&self) -> DensityKind {
        self.density
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.dim())?;
        let v = DVector::from_column_slice(x);
        Ok(v.dot(&(&self.a * &v)))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x, self.dim())?;
        let v = DVector::from_column_slice(x);
        Ok((&self.a * v * 2.0).as_slice().to_vec())
    }
}
