//! Model functions with gradients: analytic ridge and quadratic forms, and
//! an elliptic PDE with a log-normal random-field coefficient.

mod analytic;
mod elliptic;
mod kl;

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::domain::{DensityKind, InputDomain};
use crate::error::{Error, Result};

pub use analytic::{make_quadratic_form, make_ridge, QuadraticForm, Ridge, RidgeLink};
pub use elliptic::{DiscreteSystem, EllipticModel, FlowGrid, DEFAULT_GRID, LOG_COEFFICIENT_LIMIT};
pub use kl::{kl_decompose, load_or_decompose, read_kl_cache, write_kl_cache, KlExpansion, MAX_GRID_NODES};
pub use kl::{trapezoid_weights, weighted_gram};

/// A scalar function on `R^m` (or `[-1,1]^m`) with its gradient.
///
/// Implementations must be reentrant: `value` and `gradient` may be called
/// concurrently from several threads.
pub trait ModelFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn density(&self) -> DensityKind;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(x)?, self.gradient(x)?))
    }

    fn input_domain(&self) -> InputDomain {
        InputDomain {
            kind: self.density(),
            m: self.dim(),
        }
    }
}

pub(crate) fn check_dim(x: &[f64], m: usize) -> Result<()> {
    if x.len() != m {
        return Err(Error::ShapeMismatch(format!("expected a {m}-vector, got length {}", x.len())));
    }
    Ok(())
}

/// Wraps a model and counts value and gradient evaluations.
///
/// A combined `value_and_gradient` call counts once in each counter.
pub struct Counted<'a> {
    inner: &'a dyn ModelFunction,
    values: AtomicUsize,
    gradients: AtomicUsize,
}

impl<'a> Counted<'a> {
    pub fn new(inner: &'a dyn ModelFunction) -> Self {
        Self {
            inner,
            values: AtomicUsize::new(0),
            gradients: AtomicUsize::new(0),
        }
    }

    pub fn value_evals(&self) -> usize {
        self.values.load(Ordering::Relaxed)
    }

    pub fn gradient_evals(&self) -> usize {
        self.gradients.load(Ordering::Relaxed)
    }
}

impl ModelFunction for Counted<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn density(&self) -> DensityKind {
        self.inner.density()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.values.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.gradients.fetch_add(1, Ordering::Relaxed);
        self.inner.gradient(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.values.fetch_add(1, Ordering::Relaxed);
        self.gradients.fetch_add(1, Ordering::Relaxed);
        self.inner.value_and_gradient(x)
    }
}

/// Central-difference gradient, step `h` per coordinate.
pub fn finite_difference_gradient(model: &dyn ModelFunction, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut xp = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = model.value(&xp)?;
        xp[i] = x[i] - h;
        let fm = model.value(&xp)?;
        xp[i] = x[i];
        g.push((fp - fm) / (2.0 * h));
    }
    Ok(g)
}
