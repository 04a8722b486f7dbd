//! Mean-squared error bounds for the conditional expectation, its Monte
//! Carlo estimate, and a response surface built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    eigenvalues: Vec<f64>,
    n: usize,
    c1: f64,
    samples: usize,
    c2delta: f64,
    epsilon: f64,
}

impl BoundInputs {
    pub fn new(eigenvalues: Vec<f64>, n: usize, c1: f64) -> Result<Self> {
        if n == 0 || n >= eigenvalues.len() {
            return Err(Error::OutOfRange {
                name: "n",
                value: n as f64,
                expected: format!("1 <= n < {}", eigenvalues.len()),
            });
        }
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(Error::OutOfRange {
                name: "C1",
                value: c1,
                expected: "C1 > 0".into(),
            });
        }
        if eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::invalid("eigenvalues must be finite and non-negative"));
        }
        Ok(Self {
            eigenvalues,
            n,
            c1,
            samples: 1,
            c2delta: 0.0,
            epsilon: 0.0,
        })
    }

    /// Monte Carlo samples per surrogate evaluation.
    pub fn with_samples(mut self, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::OutOfRange {
                name: "N",
                value: 0.0,
                expected: "N >= 1".into(),
            });
        }
        self.samples = samples;
        Ok(self)
    }

    /// Response surface error term `C₂δ`.
    pub fn with_c2delta(mut self, c2delta: f64) -> Result<Self> {
        if !(c2delta >= 0.0 && c2delta.is_finite()) {
            return Err(Error::OutOfRange {
                name: "C2delta",
                value: c2delta,
                expected: "C2delta >= 0".into(),
            });
        }
        self.c2delta = c2delta;
        Ok(self)
    }

    /// Subspace perturbation `ε`.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::OutOfRange {
                name: "epsilon",
                value: epsilon,
                expected: "epsilon >= 0".into(),
            });
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    fn active_sum(&self) -> f64 {
        self.eigenvalues[..self.n].iter().sum()
    }

    fn tail_sum(&self) -> f64 {
        self.eigenvalues[self.n..].iter().sum()
    }

    fn mc_factor(&self) -> f64 {
        1.0 + 1.0 / self.samples as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Conditional,
    MonteCarlo,
    ResponseSurface,
}

/// `C₁ (λ_{n+1} + ... + λ_m)`
pub fn bound_conditional(b: &BoundInputs) -> f64 {
    b.c1 * b.tail_sum()
}

/// `C₁ (1 + 1/N) (λ_{n+1} + ... + λ_m)`
pub fn bound_monte_carlo(b: &BoundInputs) -> f64 {
    b.c1 * b.mc_factor() * b.tail_sum()
}

/// Monte Carlo bound plus `C₂δ`.
pub fn bound_response_surface(b: &BoundInputs) -> f64 {
    bound_monte_carlo(b) + b.c2delta
}

/// Bounds for approximations built from perturbed eigenvectors:
/// `C₁ (ε √(λ_1+...+λ_n) + √(λ_{n+1}+...+λ_m))²`, with the `(1 + 1/N)` factor
/// for the Monte Carlo and response-surface tiers and `+ C₂δ` for the latter.
pub fn bound_perturbed(b: &BoundInputs, kind: BoundKind) -> f64 {
    let core = (b.epsilon * b.active_sum().sqrt() + b.tail_sum().sqrt()).powi(2);
    if b.epsilon == 0.0 {
        // (√t)² can differ from t in the last bit; return the unperturbed form.
        return match kind {
            BoundKind::Conditional => bound_conditional(b),
            BoundKind::MonteCarlo => bound_monte_carlo(b),
            BoundKind::ResponseSurface => bound_response_surface(b),
        };
    }
    match kind {
        BoundKind::Conditional => b.c1 * core,
        BoundKind::MonteCarlo => b.c1 * b.mc_factor() * core,
        BoundKind::ResponseSurface => b.c1 * b.mc_factor() * core + b.c2delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn conditional_examples() {
        let b = BoundInputs::new(vec![4.0, 1.0, 0.0, 0.0], 2, 1.0).unwrap();
        assert_eq!(bound_conditional(&b), 0.0);
        let b = BoundInputs::new(vec![4.0, 1.0, 0.01], 1, 1.0).unwrap();
        assert_relative_eq!(bound_conditional(&b), 1.01, max_relative = 1e-15);
        let c1 = 2.0 * 3f64.sqrt() / std::f64::consts::PI;
        let b = BoundInputs::new(vec![4.0, 1.0, 0.01], 1, c1).unwrap();
        assert_relative_eq!(bound_conditional(&b), 1.1137, max_relative = 1e-4);
    }

    #[test]
    fn monte_carlo_examples() {
        let b = BoundInputs::new(vec![4.0, 0.02], 1, 1.0).unwrap();
        assert_relative_eq!(bound_monte_carlo(&b), 0.04, max_relative = 1e-15);
        let b4 = b.clone().with_samples(4).unwrap();
        assert_relative_eq!(bound_monte_carlo(&b4) / bound_monte_carlo(&b), 1.25 / 2.0, max_relative = 1e-15);
        let big = b.clone().with_samples(1_000_000_000).unwrap();
        assert_relative_eq!(bound_monte_carlo(&big), bound_conditional(&b), max_relative = 1e-8);
    }

    #[test]
    fn response_surface_examples() {
        let b = BoundInputs::new(vec![4.0, 0.02], 1, 1.0).unwrap();
        assert_eq!(bound_response_surface(&b), bound_monte_carlo(&b));
        let b = b.with_c2delta(0.1).unwrap();
        assert_relative_eq!(bound_response_surface(&b), 0.14, max_relative = 1e-15);
        let zero_tail = BoundInputs::new(vec![4.0, 0.0], 1, 1.0).unwrap().with_c2delta(0.3).unwrap();
        assert_eq!(bound_response_surface(&zero_tail), 0.3);
    }

    #[test]
    fn perturbed_examples() {
        let b = BoundInputs::new(vec![4.0, 0.0, 0.0], 1, 1.0).unwrap().with_epsilon(0.1).unwrap();
        assert_relative_eq!(bound_perturbed(&b, BoundKind::Conditional), 0.04, max_relative = 1e-14);
    }

    #[test]
    fn invalid_inputs() {
        assert!(BoundInputs::new(vec![1.0, 0.0], 1, 0.0).is_err());
        assert!(BoundInputs::new(vec![1.0, 0.0], 2, 1.0).is_err());
        let b = BoundInputs::new(vec![1.0, 0.0], 1, 1.0).unwrap();
        assert!(b.clone().with_samples(0).is_err());
        assert!(b.clone().with_epsilon(-0.1).is_err());
        assert!(b.with_c2delta(-1.0).is_err());
    }

    fn inputs() -> impl Strategy<Value = (Vec<f64>, usize, f64, usize, f64, f64)> {
        (2usize..8)
            .prop_flat_map(|m| {
                (
                    proptest::collection::vec(0.0..10.0f64, m),
                    1..m,
                    0.1..5.0f64,
                    1usize..50,
                    0.0..2.0f64,
                    0.0..0.5f64,
                )
            })
            .prop_map(|(mut l, n, c1, big_n, c2d, eps)| {
                l.sort_by(|a, b| b.total_cmp(a));
                (l, n, c1, big_n, c2d, eps)
            })
    }

    proptest! {
        #[test]
        fn ordering_and_zero_epsilon((l, n, c1, big_n, c2d, eps) in inputs()) {
            let b = BoundInputs::new(l, n, c1).unwrap()
                .with_samples(big_n).unwrap()
                .with_c2delta(c2d).unwrap();
            prop_assert!(bound_conditional(&b) <= bound_monte_carlo(&b));
            prop_assert!(bound_monte_carlo(&b) <= bound_response_surface(&b));
            for kind in [BoundKind::Conditional, BoundKind::MonteCarlo, BoundKind::ResponseSurface] {
                let unperturbed = match kind {
                    BoundKind::Conditional => bound_conditional(&b),
                    BoundKind::MonteCarlo => bound_monte_carlo(&b),
                    BoundKind::ResponseSurface => bound_response_surface(&b),
                };
                prop_assert_eq!(bound_perturbed(&b, kind), unperturbed);
                let lo = b.clone().with_epsilon(eps).unwrap();
                let hi = b.clone().with_epsilon(eps + 0.1).unwrap();
                prop_assert!(bound_perturbed(&lo, kind) <= bound_perturbed(&hi, kind));
            }
        }
    }
}
