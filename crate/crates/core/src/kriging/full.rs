//! Kriging on the full input space with an isotropic squared-exponential
//! kernel, a profiled amplitude and a nugget, both length and nugget set by
//! maximum likelihood.

use nalgebra::{DMatrix, DVector};

use super::gp::{check_poised, GpSolve};
use super::{basis_size, golden_max, PolyBasis};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FullSpaceOptions {
    /// Requested mean degree; lowered to 1 when the points cannot support it.
    pub degree: usize,
    /// Coordinate sweeps over (log length, log nugget).
    pub sweeps: usize,
    /// Bracket width at which each golden-section search stops, in log units.
    pub tolerance: f64,
}

impl Default for FullSpaceOptions {
    fn default() -> Self {
        Self {
            degree: 2,
            sweeps: 2,
            tolerance: 1e-2,
        }
    }
}

pub struct FullSpaceModel {
    points: Vec<Vec<f64>>,
    basis: PolyBasis,
    length: f64,
    nugget: f64,
    amplitude: f64,
    solve: GpSolve,
    notices: Vec<String>,
}

impl std::fmt::Debug for FullSpaceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FullSpaceModel")
            .field("points", &self.points.len())
            .field("degree", &self.basis.degree())
            .field("length", &self.length)
            .field("nugget", &self.nugget)
            .field("amplitude", &self.amplitude)
            .finish()
    }
}

struct Problem<'a> {
    sq_dist: DMatrix<f64>,
    basis: DMatrix<f64>,
    values: &'a DVector<f64>,
}

impl Problem<'_> {
    fn solve(&self, log_len: f64, log_nugget: f64) -> Result<GpSolve> {
        let scale = 0.5 * (-2.0 * log_len).exp();
        let nugget = log_nugget.exp();
        let mut cov = self.sq_dist.map(|d| (-d * scale).exp());
        for i in 0..cov.nrows() {
            cov[(i, i)] += nugget;
        }
        GpSolve::new(&cov, &self.basis, self.values)
    }

    /// Log-likelihood with the amplitude concentrated out.
    fn concentrated(&self, log_len: f64, log_nugget: f64) -> f64 {
        match self.solve(log_len, log_nugget) {
            Ok(s) => {
                let p = self.values.len() as f64;
                -0.5 * p * (s.quad / p).max(f64::MIN_POSITIVE).ln() - 0.5 * s.log_det
            }
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

impl FullSpaceModel {
    pub fn fit(points: &[Vec<f64>], values: &[f64], opts: &FullSpaceOptions) -> Result<Self> {
        let p = points.len();
        if p != values.len() || p == 0 {
            return Err(Error::ShapeMismatch(format!("{p} points, {} values", values.len())));
        }
        let m = points[0].len();
        if m == 0 || points.iter().any(|x| x.len() != m) {
            return Err(Error::ShapeMismatch("points must share a positive dimension".into()));
        }
        if values.iter().chain(points.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("training data must be finite"));
        }
        let mut notices = Vec::new();
        let mut degree = opts.degree.min(2);
        if degree == 2 && p < basis_size(m, 2) {
            let msg = format!(
                "{p} training points cannot support a quadratic mean in {m} variables ({} terms); using a linear mean",
                basis_size(m, 2)
            );
            log::info!("{msg}");
            notices.push(msg);
            degree = 1;
        }
        let basis = PolyBasis::new(m, degree);
        let basis_matrix = basis.design_matrix(points);
        check_poised(&basis_matrix, degree)?;

        let sq_dist = DMatrix::from_fn(p, p, |i, j| {
            points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        });
        let values_v = DVector::from_column_slice(values);
        let problem = Problem {
            sq_dist,
            basis: basis_matrix,
            values: &values_v,
        };

        let len_range = (0.1f64.ln(), (100.0 * (m as f64).sqrt()).ln());
        let nug_range = (1e-8f64.ln(), 0.0);
        let mut log_len = 0.5 * (len_range.0 + len_range.1);
        let mut log_nug = (1e-4f64).ln();
        let mut best = f64::NEG_INFINITY;
        for _ in 0..opts.sweeps.max(1) {
            let (l, _) = golden_max(|t| problem.concentrated(t, log_nug), len_range.0, len_range.1, opts.tolerance);
            log_len = l;
            let (g, v) = golden_max(|t| problem.concentrated(log_len, t), nug_range.0, nug_range.1, opts.tolerance);
            log_nug = g;
            best = v;
        }
        if best == f64::NEG_INFINITY {
            return Err(Error::Conditioning {
                suggested_jitter: log_nug.exp(),
            });
        }
        let solve = problem.solve(log_len, log_nug)?;
        let amplitude = solve.quad / p as f64;
        Ok(Self {
            points: points.to_vec(),
            basis,
            length: log_len.exp(),
            nugget: log_nug.exp(),
            amplitude,
            solve,
            notices,
        })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn notices(&self) -> &[String] {
        &self.notices
    }

    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let scale = 0.5 / (self.length * self.length);
        let k = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| {
                let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
                (-d * scale).exp()
            }),
        );
        let f = DVector::from_vec(self.basis.eval(x));
        let (mean, var) = self.solve.predict(&k, 1.0, &f);
        (mean, (self.amplitude * var).max(0.0))
    }
}
