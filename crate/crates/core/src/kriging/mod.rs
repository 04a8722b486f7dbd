//! Kriging on the reduced domain with hyperparameters tied to the
//! gradient-covariance eigenvalues.
//!
//! Covariance between training values is `K(y, y') + η²δ` with the
//! unit-amplitude product kernel `exp(-Σ (y_i - y'_i)² / (2ℓ_i²))`. A single
//! scale `α` sets `σ² = α Σλ`, `ℓ_i² = σ²/λ_i` and `η² = α (λ_{n+1}+...+λ_m)`;
//! `α` is chosen by maximizing the profile likelihood over
//! `[σ̂²/Σλ, C₁]`. The mean is a quadratic polynomial in `y`.

mod basis;
mod full;
mod gp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::InputDomain;
use crate::error::{Error, Result};
use gp::{check_poised, GpSolve};

pub use basis::{basis_size, PolyBasis};
pub use full::{FullSpaceModel, FullSpaceOptions};

/// Degree of the polynomial mean on the reduced domain.
pub const MEAN_DEGREE: usize = 2;

/// Relative width at which the golden-section search on `α` stops.
pub const ALPHA_TOLERANCE: f64 = 1e-4;

/// Smallest `α` searched when the bracket's lower end is zero, relative to the upper end.
const ALPHA_FLOOR: f64 = 1e-6;

/// Product squared-exponential correlation.
pub fn kernel(y1: &[f64], y2: &[f64], lengths: &[f64]) -> f64 {
    let s: f64 = y1
        .iter()
        .zip(y2)
        .zip(lengths)
        .map(|((a, b), l)| (a - b).powi(2) / (2.0 * l * l))
        .sum();
    (-s).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrigingHyperparameters {
    pub alpha: f64,
    pub sigma2: f64,
    pub lengths: Vec<f64>,
    pub eta2: f64,
}

impl KrigingHyperparameters {
    /// From the active values `λ_1..λ_n`, their total `Σλ` and tail sum.
    pub(crate) fn from_spectrum(active: &[f64], total: f64, tail: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: alpha,
                expected: "alpha > 0".into(),
            });
        }
        if let Some(i) = active.iter().position(|l| !(*l > 0.0)) {
            return Err(Error::Degenerate(format!(
                "active eigenvalue {} is zero; its correlation length would be infinite",
                i + 1
            )));
        }
        let sigma2 = alpha * total;
        Ok(Self {
            alpha,
            sigma2,
            lengths: active.iter().map(|l| (sigma2 / l).sqrt()).collect(),
            eta2: alpha * tail,
        })
    }
}

/// `σ² = αΣλ`, `ℓ_i = √(σ²/λ_i)` for `i <= n`, `η² = α(λ_{n+1}+...+λ_m)`.
pub fn hyperparameters_from_eigenvalues(lambda: &[f64], n: usize, alpha: f64) -> Result<KrigingHyperparameters> {
    check_spectrum(lambda, n)?;
    let total: f64 = lambda.iter().sum();
    let tail: f64 = lambda[n..].iter().sum();
    KrigingHyperparameters::from_spectrum(&lambda[..n], total, tail, alpha)
}

fn check_spectrum(lambda: &[f64], n: usize) -> Result<()> {
    if n == 0 || n >= lambda.len() {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            expected: format!("1 <= n < {}", lambda.len()),
        });
    }
    if lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::invalid("eigenvalues must be finite and non-negative"));
    }
    if lambda.windows(2).any(|p| p[0] < p[1]) {
        return Err(Error::invalid("eigenvalues must be in descending order"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaBracket {
    pub lower: f64,
    pub upper: f64,
    pub warning: Option<String>,
}

/// `σ̂²/Σλ <= α <= C₁`, with the lower end pinned to `C₁` if it exceeds it.
pub fn alpha_bracket(sigma_hat2: f64, lambda: &[f64], domain: &InputDomain) -> Result<AlphaBracket> {
    let total: f64 = lambda.iter().sum();
    bracket_from_total(sigma_hat2, total, domain.poincare_constant())
}

fn bracket_from_total(sigma_hat2: f64, total: f64, c1: f64) -> Result<AlphaBracket> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Degenerate("eigenvalue sum is zero; the alpha bracket is undefined".into()));
    }
    if !(sigma_hat2 >= 0.0 && sigma_hat2.is_finite()) {
        return Err(Error::OutOfRange {
            name: "sigma_hat2",
            value: sigma_hat2,
            expected: "sigma_hat2 >= 0".into(),
        });
    }
    let lower = sigma_hat2 / total;
    if lower > c1 {
        let msg = format!("alpha lower bound {lower:.4e} exceeds C1 = {c1:.4e}; pinning alpha to C1");
        log::warn!("{msg}");
        return Ok(AlphaBracket {
            lower: c1,
            upper: c1,
            warning: Some(msg),
        });
    }
    Ok(AlphaBracket {
        lower,
        upper: c1,
        warning: None,
    })
}

fn covariance(design: &[Vec<f64>], hyper: &KrigingHyperparameters) -> DMatrix<f64> {
    let p = design.len();
    let mut cov = DMatrix::from_fn(p, p, |i, j| kernel(&design[i], &design[j], &hyper.lengths));
    for i in 0..p {
        cov[(i, i)] += hyper.eta2;
    }
    cov
}

fn validate_training(design: &[Vec<f64>], training: &[f64], n: usize) -> Result<()> {
    if design.len() != training.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} design points, {} training values",
            design.len(),
            training.len()
        )));
    }
    if design.iter().any(|y| y.len() != n) {
        return Err(Error::ShapeMismatch(format!("design points must have length {n}")));
    }
    if training.iter().chain(design.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("design and training values must be finite"));
    }
    Ok(())
}

/// Eigenvalue-derived spectrum pieces used by the heuristic.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Spectrum {
    pub values: Vec<f64>,
    pub n: usize,
}

impl Spectrum {
    fn hyper(&self, alpha: f64) -> Result<KrigingHyperparameters> {
        let total: f64 = self.values.iter().sum();
        let tail: f64 = self.values[self.n..].iter().sum();
        KrigingHyperparameters::from_spectrum(&self.values[..self.n], total, tail, alpha)
    }

    fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn profile_likelihood(design: &[Vec<f64>], training: &[f64], spectrum: &Spectrum, alpha: f64) -> Result<f64> {
    let hyper = spectrum.hyper(alpha)?;
    let basis = PolyBasis::new(spectrum.n, MEAN_DEGREE).design_matrix(design);
    let solve = GpSolve::new(&covariance(design, &hyper), &basis, &DVector::from_column_slice(training))?;
    Ok(solve.log_likelihood())
}

/// Profile log-likelihood of the universal kriging model at a given `α`.
pub fn log_marginal_likelihood(
    design: &[Vec<f64>],
    training: &[f64],
    lambda: &[f64],
    n: usize,
    alpha: f64,
) -> Result<f64> {
    check_spectrum(lambda, n)?;
    validate_training(design, training, n)?;
    let spectrum = Spectrum {
        values: lambda.to_vec(),
        n,
    };
    profile_likelihood(design, training, &spectrum, alpha)
}

/// Golden-section maximization of `f` on `[lo, hi]`, stopping when the
/// bracket is narrower than `tol`. Returns the best point seen, including
/// the end points.
pub(crate) fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut best = [(lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .expect("two candidates");
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    for cand in [(c, fc), (d, fd)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

/// Points in the coarse scan that precedes the golden-section refinement.
const ALPHA_SCAN_POINTS: usize = 25;

/// The profile likelihood can have a second mode where the correlation
/// lengths collapse, so a coarse log-spaced scan picks the cell holding the
/// global maximum before golden section refines it.
pub(crate) fn scan_then_golden<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let steps = ALPHA_SCAN_POINTS - 1;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let k = (0..vals.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
    let (a, b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(steps)]);
    let refined = golden_max(&mut *f, a, b, tol);
    if refined.1 > vals[k] {
        refined
    } else {
        (grid[k], vals[k])
    }
}

/// A fitted kriging surface on the reduced domain.
#[derive(Clone, Debug)]
pub struct KrigingModel {
    design: Vec<Vec<f64>>,
    training: Vec<f64>,
    spectrum: Vec<f64>,
    n: usize,
    hyper: KrigingHyperparameters,
    beta: Vec<f64>,
    weights: Vec<f64>,
    log_likelihood: f64,
    jitter: f64,
    warnings: Vec<String>,
    solve: std::sync::Arc<GpSolve>,
}

impl std::fmt::Debug for GpSolve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GpSolve").field("jitter", &self.jitter).finish_non_exhaustive()
    }
}

/// Fit the kriging surface, choosing `α` by maximum likelihood on its bracket.
pub fn fit(
    design: &[Vec<f64>],
    training: &[f64],
    lambda: &[f64],
    n: usize,
    sigma_hat2: f64,
    domain: &InputDomain,
) -> Result<KrigingModel> {
    check_spectrum(lambda, n)?;
    if lambda.len() != domain.m {
        return Err(Error::ShapeMismatch(format!(
            "{} eigenvalues for an input dimension of {}",
            lambda.len(),
            domain.m
        )));
    }
    let spectrum = Spectrum {
        values: lambda.to_vec(),
        n,
    };
    fit_spectrum(design, training, spectrum, sigma_hat2, domain.poincare_constant())
}

pub(crate) fn fit_spectrum(
    design: &[Vec<f64>],
    training: &[f64],
    spectrum: Spectrum,
    sigma_hat2: f64,
    c1: f64,
) -> Result<KrigingModel> {
    let n = spectrum.n;
    validate_training(design, training, n)?;
    let basis = PolyBasis::new(n, MEAN_DEGREE);
    check_poised(&basis.design_matrix(design), MEAN_DEGREE)?;
    let bracket = bracket_from_total(sigma_hat2, spectrum.total(), c1)?;

    let alpha = if bracket.lower >= bracket.upper {
        bracket.upper
    } else {
        let lo = bracket.lower.max(bracket.upper * ALPHA_FLOOR);
        let mut last_err = None;
        let mut objective = |t: f64| match profile_likelihood(design, training, &spectrum, t.exp()) {
            Ok(v) => v,
            Err(e) => {
                last_err = Some(e);
                f64::NEG_INFINITY
            }
        };
        let (log_alpha, best) = scan_then_golden(&mut objective, lo.ln(), bracket.upper.ln(), ALPHA_TOLERANCE);
        if best == f64::NEG_INFINITY {
            return Err(last_err.unwrap_or(Error::Conditioning { suggested_jitter: 1e-8 }));
        }
        log_alpha.exp()
    };
    let mut model = KrigingModel::assemble(design, training, spectrum, alpha, 0.0)?;
    model.warnings.extend(bracket.warning);
    Ok(model)
}

impl KrigingModel {
    fn assemble(design: &[Vec<f64>], training: &[f64], spectrum: Spectrum, alpha: f64, extra_jitter: f64) -> Result<Self> {
        let hyper = spectrum.hyper(alpha)?;
        let basis = PolyBasis::new(spectrum.n, MEAN_DEGREE).design_matrix(design);
        let mut cov = covariance(design, &hyper);
        for i in 0..cov.nrows() {
            cov[(i, i)] += extra_jitter;
        }
        let solve = GpSolve::new(&cov, &basis, &DVector::from_column_slice(training))?;
        Ok(Self {
            design: design.to_vec(),
            training: training.to_vec(),
            n: spectrum.n,
            spectrum: spectrum.values,
            hyper,
            beta: solve.beta.as_slice().to_vec(),
            weights: solve.weights.as_slice().to_vec(),
            log_likelihood: solve.log_likelihood(),
            jitter: extra_jitter + solve.jitter,
            warnings: Vec::new(),
            solve: std::sync::Arc::new(solve),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn design(&self) -> &[Vec<f64>] {
        &self.design
    }

    pub fn training(&self) -> &[f64] {
        &self.training
    }

    pub fn hyperparameters(&self) -> &KrigingHyperparameters {
        &self.hyper
    }

    pub fn mean_coefficients(&self) -> &[f64] {
        &self.beta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Kriging mean and predictive variance at `y`; the variance is clamped at zero.
    pub fn predict(&self, y: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.design.len(),
            self.design.iter().map(|d| kernel(y, d, &self.hyper.lengths)),
        );
        let f = DVector::from_vec(PolyBasis::new(self.n, MEAN_DEGREE).eval(y));
        let mean = f.iter().zip(&self.beta).map(|(a, b)| a * b).sum::<f64>()
            + k.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
        let (_, var) = self.solve.predict(&k, 1.0, &f);
        (mean, var.max(0.0))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            kernel: KERNEL_NOTE.into(),
            mean_basis: "graded lexicographic monomials, degree 2".into(),
            n: self.n,
            design: self.design.clone(),
            training: self.training.clone(),
            alpha: self.hyper.alpha,
            eigenvalues: self.spectrum.clone(),
            sigma2: self.hyper.sigma2,
            lengths: self.hyper.lengths.clone(),
            eta2: self.hyper.eta2,
            jitter: self.jitter,
            beta: self.beta.clone(),
            weights: self.weights.clone(),
            log_likelihood: self.log_likelihood,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.n == 0 || doc.n >= doc.eigenvalues.len() {
            return Err(Error::Config("model document has an invalid partition".into()));
        }
        let spectrum = Spectrum {
            values: doc.eigenvalues,
            n: doc.n,
        };
        let mut model = Self::assemble(&doc.design, &doc.training, spectrum, doc.alpha, doc.jitter)?;
        if doc.beta.len() != model.beta.len() || doc.weights.len() != model.weights.len() {
            return Err(Error::Config("model document coefficients have the wrong length".into()));
        }
        model.beta = doc.beta;
        model.weights = doc.weights;
        model.log_likelihood = doc.log_likelihood;
        Ok(model)
    }
}

const KERNEL_NOTE: &str = "unit-amplitude product squared exponential; covariance K + eta2*I (sigma2 enters only through the lengths)";

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    kernel: String,
    mean_basis: String,
    n: usize,
    design: Vec<Vec<f64>>,
    training: Vec<f64>,
    alpha: f64,
    eigenvalues: Vec<f64>,
    sigma2: f64,
    lengths: Vec<f64>,
    eta2: f64,
    jitter: f64,
    beta: Vec<f64>,
    weights: Vec<f64>,
    log_likelihood: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel(&[0.3, -1.0], &[0.3, -1.0], &[0.5, 2.0]), 1.0);
        assert_relative_eq!(kernel(&[0.0], &[0.7], &[0.7]), (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(kernel(&[0.0, 0.0], &[0.4, 1.5], &[0.4, 1.5]), (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!((-0.5f64).exp(), 0.6065, max_relative = 1e-4);
        assert_eq!(kernel(&[1.0, 2.0], &[0.0, 0.5], &[0.3, 0.8]), kernel(&[0.0, 0.5], &[1.0, 2.0], &[0.3, 0.8]));
    }

    #[test]
    fn hyperparameter_substitution() {
        let h = hyperparameters_from_eigenvalues(&[4.0, 1.0], 1, 1.0).unwrap();
        assert_eq!(h.sigma2, 5.0);
        assert_relative_eq!(h.lengths[0].powi(2), 1.25, max_relative = 1e-15);
        assert_eq!(h.eta2, 1.0);
        assert_eq!(hyperparameters_from_eigenvalues(&[1.0, 0.0], 1, 1.0).unwrap().eta2, 0.0);
        let h3 = hyperparameters_from_eigenvalues(&[4.0, 1.0], 1, 3.0).unwrap();
        assert_relative_eq!(h3.sigma2, 3.0 * h.sigma2);
        assert_relative_eq!(h3.eta2, 3.0 * h.eta2);
        assert_relative_eq!(h3.lengths[0].powi(2), 3.0 * h.lengths[0].powi(2), max_relative = 1e-14);
        assert!(matches!(
            hyperparameters_from_eigenvalues(&[1.0, 0.0, 0.0], 2, 1.0),
            Err(Error::Degenerate(_))
        ));
        assert!(hyperparameters_from_eigenvalues(&[1.0, 2.0], 1, 1.0).is_err());
    }

    #[test]
    fn length_ordering_follows_eigenvalues() {
        let h = hyperparameters_from_eigenvalues(&[9.0, 4.0, 1.0, 0.5], 3, 0.7).unwrap();
        assert!(h.lengths.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn bracket_examples() {
        let g = InputDomain::gaussian(2);
        assert_eq!(
            alpha_bracket(1.0, &[4.0, 1.0], &g).unwrap(),
            AlphaBracket { lower: 0.2, upper: 1.0, warning: None }
        );
        let b = alpha_bracket(0.0, &[4.0, 1.0], &g).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 1.0));
        let u = alpha_bracket(1.0, &vec![0.1; 100], &InputDomain::uniform(100)).unwrap();
        assert_relative_eq!(u.upper, 6.366, max_relative = 1e-4);
        let clamped = alpha_bracket(10.0, &[1.0, 1.0], &g).unwrap();
        assert_eq!((clamped.lower, clamped.upper), (1.0, 1.0));
        assert!(clamped.warning.is_some());
        assert!(matches!(alpha_bracket(1.0, &[0.0, 0.0], &g), Err(Error::Degenerate(_))));
    }

    #[test]
    fn golden_section_finds_interior_and_boundary_maxima() {
        let (x, _) = golden_max(|t| -(t - 0.3).powi(2), -1.0, 2.0, 1e-8);
        assert!((x - 0.3).abs() < 1e-6);
        let (x, _) = golden_max(|t| t, -1.0, 2.0, 1e-8);
        assert_eq!(x, 2.0);
    }
}
