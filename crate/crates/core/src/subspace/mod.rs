//! Active subspace estimation from gradient samples, subspace perturbation,
//! and the mean-squared error bounds of the approximation chain.

mod bounds;
mod perturb;
mod samples;
mod sensitivity;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{canonicalize_signs, complete_basis, orthonormality_defect, spectral_norm};

pub use bounds::{
    bound_conditional, bound_monte_carlo, bound_perturbed, bound_response_surface, BoundInputs, BoundKind,
};
pub use perturb::perturb_subspace;
pub use samples::GradientSampleSet;
pub use sensitivity::{local_sensitivity_ranking, SensitivityRanking};

/// Eigenvalues in `[-1e-12, 0)` are treated as roundoff and set to zero.
pub const NEGATIVE_EIGENVALUE_CLAMP: f64 = -1e-12;

/// Orthonormal eigenbasis `W`, descending eigenvalues and partition index.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSubspace {
    w: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    n: usize,
}

impl ActiveSubspace {
    /// Validate and assemble a subspace from its parts.
    pub fn from_parts(w: DMatrix<f64>, eigenvalues: Vec<f64>, n: usize) -> Result<Self> {
        let m = w.nrows();
        if w.ncols() != m || eigenvalues.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "W is {}x{}, {} eigenvalues",
                w.nrows(),
                w.ncols(),
                eigenvalues.len()
            )));
        }
        check_partition(n, m)?;
        let defect = orthonormality_defect(&w);
        if !(defect <= 1e-10) {
            return Err(Error::invalid(format!("W is not orthonormal (‖WᵀW - I‖ = {defect:e})")));
        }
        let mut eigenvalues = eigenvalues;
        for (i, lam) in eigenvalues.iter_mut().enumerate() {
            if !lam.is_finite() || *lam < NEGATIVE_EIGENVALUE_CLAMP {
                return Err(Error::invalid(format!("eigenvalue {i} = {lam} is negative or non-finite")));
            }
            *lam = lam.max(0.0);
        }
        if eigenvalues.windows(2).any(|p| p[0] < p[1]) {
            return Err(Error::invalid("eigenvalues must be in descending order"));
        }
        Ok(Self { w, eigenvalues, n })
    }

    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn w1(&self) -> DMatrix<f64> {
        self.w.columns(0, self.n).into_owned()
    }

    pub fn w2(&self) -> DMatrix<f64> {
        self.w.columns(self.n, self.m() - self.n).into_owned()
    }

    /// `λ_1 + ... + λ_n`
    pub fn active_sum(&self) -> f64 {
        self.eigenvalues[..self.n].iter().sum()
    }

    /// `λ_{n+1} + ... + λ_m`
    pub fn tail_sum(&self) -> f64 {
        self.eigenvalues[self.n..].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Same eigenpairs, different partition index.
    pub fn with_partition(&self, n: usize) -> Result<Self> {
        check_partition(n, self.m())?;
        Ok(Self {
            n,
            ..self.clone()
        })
    }

    pub(crate) fn with_basis(&self, w: DMatrix<f64>) -> Self {
        Self {
            w,
            eigenvalues: self.eigenvalues.clone(),
            n: self.n,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = SubspaceDoc {
            m: self.m(),
            n: self.n,
            eigenvalues: self.eigenvalues.clone(),
            w: self.w.transpose().as_slice().to_vec(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SubspaceDoc = serde_json::from_str(text)?;
        if doc.w.len() != doc.m * doc.m {
            return Err(Error::ShapeMismatch(format!(
                "W has {} entries, expected {}",
                doc.w.len(),
                doc.m * doc.m
            )));
        }
        let w = DMatrix::from_row_slice(doc.m, doc.m, &doc.w);
        Self::from_parts(w, doc.eigenvalues, doc.n)
    }
}

#[derive(Serialize, Deserialize)]
struct SubspaceDoc {
    m: usize,
    n: usize,
    eigenvalues: Vec<f64>,
    /// Row-major.
    #[serde(rename = "W")]
    w: Vec<f64>,
}

fn check_partition(n: usize, m: usize) -> Result<()> {
    if n == 0 || n >= m {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            expected: format!("1 <= n < {m}"),
        });
    }
    Ok(())
}

/// `G = (1/√M) [∇f_1 ... ∇f_M]`, an m×M matrix.
pub fn assemble_gradient_matrix(samples: &GradientSampleSet) -> DMatrix<f64> {
    let scale = 1.0 / (samples.len() as f64).sqrt();
    let m = samples.m();
    DMatrix::from_fn(m, samples.len(), |i, j| samples.gradients()[j][i] * scale)
}

/// Left singular vectors and squared singular values of the gradient matrix.
///
/// When `M < m` the basis is completed orthonormally and the trailing
/// eigenvalues are exactly zero. Columns follow the sign convention of
/// [`canonicalize_signs`].
pub fn estimate_subspace(samples: &GradientSampleSet, n: usize) -> Result<ActiveSubspace> {
    let m = samples.m();
    check_partition(n, m)?;
    let g = assemble_gradient_matrix(samples);
    if g.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("all sampled gradients are zero".into()));
    }
    let svd = g.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let sorted = DMatrix::from_columns(&order.iter().map(|&k| u.column(k)).collect::<Vec<_>>());
    let mut w = if sorted.ncols() < m {
        complete_basis(&sorted)
    } else {
        sorted
    };
    canonicalize_signs(&mut w);

    let mut eigenvalues = vec![0.0; m];
    for (slot, &k) in eigenvalues.iter_mut().zip(&order) {
        *slot = svd.singular_values[k].powi(2);
    }
    ActiveSubspace::from_parts(w, eigenvalues, n)
}

/// Distance between two orthonormal column sets after per-column sign
/// alignment, `‖A - B‖₂`.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    for (name, mat) in [("A", a), ("B", b)] {
        let defect = orthonormality_defect(mat);
        if !(defect <= 1e-8) {
            return Err(Error::invalid(format!("{name} is not orthonormal (defect {defect:e})")));
        }
    }
    Ok(aligned_distance(a, b))
}

pub(crate) fn aligned_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut diff = a.clone();
    for j in 0..a.ncols() {
        let (ca, cb) = (a.column(j), b.column(j));
        let sign = if (&ca - &cb).norm() <= (&ca + &cb).norm() { 1.0 } else { -1.0 };
        diff.column_mut(j).axpy(-sign, &cb, 1.0);
    }
    spectral_norm(&diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gradients(g: &[&[f64]]) -> GradientSampleSet {
        GradientSampleSet::from_gradients(g.iter().map(|v| v.to_vec()).collect()).unwrap()
    }

    #[test]
    fn gradient_matrix_scaling() {
        let g = assemble_gradient_matrix(&gradients(&[&[2.0, 0.0]]));
        assert_eq!(g, DMatrix::from_column_slice(2, 1, &[2.0, 0.0]));

        let g = assemble_gradient_matrix(&gradients(&[&[1.0, 0.0][..]; 4]));
        assert!(g.column_iter().all(|c| c[0] == 0.5 && c[1] == 0.0));

        // G Gᵀ by hand: (1/2)([1,1][1,1]ᵀ + [1,-1][1,-1]ᵀ) = I
        let g = assemble_gradient_matrix(&gradients(&[&[1.0, 1.0], &[1.0, -1.0]]));
        let s = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(g, DMatrix::from_column_slice(2, 2, &[s, s, s, -s]), epsilon = 1e-15);
        assert_abs_diff_eq!(&g * g.transpose(), DMatrix::identity(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn ridge_direction_from_one_gradient() {
        let a = [0.7, 0.3];
        let h1 = (0.7 * 0.4_f64 - 0.3 * 1.1).exp();
        let sub = estimate_subspace(&gradients(&[&[h1 * a[0], h1 * a[1]]]), 1).unwrap();
        let norm = 0.58_f64.sqrt();
        assert_abs_diff_eq!(sub.w()[(0, 0)], 0.7 / norm, epsilon = 1e-12);
        assert_abs_diff_eq!(sub.w()[(1, 0)], 0.3 / norm, epsilon = 1e-12);
        assert!((sub.w()[(0, 0)] - 0.9191).abs() < 1e-4 && (sub.w()[(1, 0)] - 0.3939).abs() < 1e-4);
        assert_eq!(sub.eigenvalues()[1], 0.0);
    }

    #[test]
    fn identity_covariance_pair() {
        let sub = estimate_subspace(&gradients(&[&[1.0, 1.0], &[1.0, -1.0]]), 1).unwrap();
        assert_abs_diff_eq!(sub.eigenvalues()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sub.eigenvalues()[1], 1.0, epsilon = 1e-12);
        assert!(orthonormality_defect(sub.w()) < 1e-12);
        for j in 0..2 {
            let c = sub.w().column(j);
            let k = if c[0].abs() >= c[1].abs() * (1.0 - 1e-12) { 0 } else { 1 };
            assert!(c[k] > 0.0);
        }
    }

    #[test]
    fn partition_and_degenerate_errors() {
        let s = gradients(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(estimate_subspace(&s, 0), Err(Error::OutOfRange { .. })));
        assert!(matches!(estimate_subspace(&s, 3), Err(Error::OutOfRange { .. })));
        let z = gradients(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        assert!(matches!(estimate_subspace(&z, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn distance_examples() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(subspace_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(subspace_distance(&a, &(-&a)).unwrap(), 0.0);
        let t = 0.1_f64;
        let b = DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]);
        // ‖[1 - cos t, -sin t]‖ = 2 sin(t/2)
        let expected = ((1.0 - t.cos()).powi(2) + t.sin().powi(2)).sqrt();
        assert_abs_diff_eq!(subspace_distance(&a, &b).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.09996, epsilon = 1e-5);
        let c = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!(matches!(subspace_distance(&a, &c), Err(Error::ShapeMismatch(_))));
        let not_ortho = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(subspace_distance(&a, &not_ortho).is_err());
    }

    #[test]
    fn json_round_trip() {
        let sub = estimate_subspace(&gradients(&[&[1.0, 2.0, 0.5], &[0.3, -1.0, 2.0]]), 2).unwrap();
        let text = sub.to_json().unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["m"], 3);
        assert_eq!(doc["W"][1].as_f64().unwrap(), sub.w()[(0, 1)]);
        assert_eq!(ActiveSubspace::from_json(&text).unwrap(), sub);
    }

    #[test]
    fn from_parts_clamps_roundoff_negatives() {
        let sub = ActiveSubspace::from_parts(DMatrix::identity(2, 2), vec![1.0, -1e-13], 1).unwrap();
        assert_eq!(sub.eigenvalues()[1], 0.0);
        assert!(ActiveSubspace::from_parts(DMatrix::identity(2, 2), vec![1.0, -1e-6], 1).is_err());
        assert!(ActiveSubspace::from_parts(DMatrix::identity(2, 2), vec![1.0, 2.0], 1).is_err());
    }
}
