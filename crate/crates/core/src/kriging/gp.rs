//! Universal kriging with a fixed covariance matrix: generalized least
//! squares for the mean coefficients, kernel weights on the residual.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::cholesky_with_jitter;

pub(crate) struct GpSolve {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
    pub sinv_f: DMatrix<f64>,
    pub gls: Cholesky<f64, Dyn>,
    pub beta: DVector<f64>,
    pub weights: DVector<f64>,
    /// `rᵀΣ⁻¹r` with `r = g - Fβ`.
    pub quad: f64,
    pub log_det: f64,
}

impl GpSolve {
    pub fn new(cov: &DMatrix<f64>, basis: &DMatrix<f64>, values: &DVector<f64>) -> Result<Self> {
        let (chol, jitter) = cholesky_with_jitter(cov)?;
        let sinv_f = chol.solve(basis);
        let gram = basis.transpose() * &sinv_f;
        let gls = Cholesky::new(gram).ok_or(Error::Conditioning {
            suggested_jitter: 1e-10 * cov.trace().abs() / cov.nrows().max(1) as f64,
        })?;
        let beta = gls.solve(&(sinv_f.transpose() * values));
        let resid = values - basis * &beta;
        let weights = chol.solve(&resid);
        let quad = resid.dot(&weights);
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            chol,
            jitter,
            sinv_f,
            gls,
            beta,
            weights,
            quad,
            log_det,
        })
    }

    /// Profile log-likelihood with the mean coefficients at their GLS values.
    pub fn log_likelihood(&self) -> f64 {
        let p = self.weights.len() as f64;
        -0.5 * self.quad - 0.5 * self.log_det - 0.5 * p * (2.0 * std::f64::consts::PI).ln()
    }

    /// Mean and variance at a point with cross-covariances `k`, prior
    /// variance `k0` and basis values `f`.
    pub fn predict(&self, k: &DVector<f64>, k0: f64, f: &DVector<f64>) -> (f64, f64) {
        let mean = f.dot(&self.beta) + k.dot(&self.weights);
        let sinv_k = self.chol.solve(k);
        let u = f - self.sinv_f.transpose() * k;
        let var = k0 - k.dot(&sinv_k) + u.dot(&self.gls.solve(&u));
        (mean, var)
    }
}

/// Fail unless the basis matrix has full column rank.
pub(crate) fn check_poised(basis: &DMatrix<f64>, degree: usize) -> Result<()> {
    let (p, q) = basis.shape();
    let err = Error::NotPoised {
        degree,
        points: p,
        basis: q,
    };
    if p < q {
        return Err(err);
    }
    let sv = basis.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if !(max > 0.0) || min <= 1e-10 * max {
        return Err(err);
    }
    Ok(())
}
