use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::DensityKind;
use crate::error::{Error, Result};
use crate::models::{make_quadratic_form, make_ridge, EllipticModel, ModelFunction, RidgeLink, DEFAULT_GRID};

/// Run configuration. Every field has a default, so `{}` is a valid config
/// file (the elliptic model with `β = 1`, `m = 100`, `M = 300`, `n = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelSpec,
    /// Gradient samples `M`.
    #[serde(alias = "M")]
    pub gradient_samples: usize,
    /// Active subspace dimension.
    pub n: usize,
    pub design: DesignSpec,
    /// Monte Carlo samples per training point, `N`.
    #[serde(alias = "N")]
    pub mc_samples: usize,
    pub seeds: Seeds,
    pub compare: CompareToggles,
    /// Size of the fresh testing set used by the full-space comparison.
    pub comparison_test_points: usize,
    /// Run directory for reports; `None` writes nothing.
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            gradient_samples: 300,
            n: 1,
            design: DesignSpec::default(),
            mc_samples: 1,
            seeds: Seeds::default(),
            compare: CompareToggles::default(),
            comparison_test_points: 500,
            output_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `h(aᵀx)`.
    Ridge {
        direction: Vec<f64>,
        #[serde(default = "default_link")]
        link: RidgeLink,
        #[serde(default = "default_density")]
        domain: DensityKind,
    },
    /// `xᵀAx`; give either the full `matrix` (rows) or its `diagonal`.
    Quadratic {
        #[serde(default)]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        diagonal: Option<Vec<f64>>,
        #[serde(default = "default_density")]
        domain: DensityKind,
    },
    /// Flow through a log-normal medium, `m` KL terms on a `grid × grid` mesh.
    Elliptic {
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_terms")]
        terms: usize,
        #[serde(default = "default_grid")]
        grid: usize,
        #[serde(default)]
        cache_dir: Option<PathBuf>,
    },
}

fn default_link() -> RidgeLink {
    RidgeLink::Exp
}

fn default_density() -> DensityKind {
    DensityKind::GaussianStandard
}

fn default_beta() -> f64 {
    1.0
}

fn default_terms() -> usize {
    100
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Elliptic {
            beta: default_beta(),
            terms: default_terms(),
            grid: default_grid(),
            cache_dir: None,
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn ModelFunction>> {
        Ok(match self {
            ModelSpec::Ridge { direction, link, domain } => {
                Box::new(make_ridge(direction.clone(), *link)?.with_density(*domain))
            }
            ModelSpec::Quadratic { matrix, diagonal, domain } => {
                let a = match (matrix, diagonal) {
                    (Some(rows), None) => {
                        let m = rows.len();
                        if rows.iter().any(|r| r.len() != m) {
                            return Err(Error::Config("quadratic matrix must be square".into()));
                        }
                        DMatrix::from_fn(m, m, |i, j| rows[i][j])
                    }
                    (None, Some(d)) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
                    _ => return Err(Error::Config("quadratic model needs exactly one of matrix or diagonal".into())),
                };
                Box::new(make_quadratic_form(a)?.with_density(*domain))
            }
            ModelSpec::Elliptic {
                beta,
                terms,
                grid,
                cache_dir,
            } => Box::new(EllipticModel::new(*grid, *beta, *terms, cache_dir.as_deref())?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSpec {
    /// Tensor-grid points per reduced coordinate (Gaussian inputs).
    pub points_per_dim: usize,
    /// Grid spacing on the zonotope (uniform inputs).
    pub spacing: f64,
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self {
            points_per_dim: crate::domain::DEFAULT_POINTS_PER_DIM,
            spacing: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub sampling: u64,
    pub mc: u64,
    pub perturbation: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            sampling: 1,
            mc: 2,
            perturbation: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareToggles {
    pub local_sensitivity: bool,
    pub full_space: bool,
}

impl Default for CompareToggles {
    fn default() -> Self {
        Self {
            local_sensitivity: true,
            full_space: true,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks that do not need the model to be built.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.gradient_samples == 0 {
            return bad("gradient_samples (M) must be at least 1".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.mc_samples == 0 {
            return bad("mc_samples (N) must be at least 1".into());
        }
        if self.design.points_per_dim < 3 {
            return bad("design.points_per_dim must be at least 3 for a quadratic mean".into());
        }
        if !(self.design.spacing > 0.0 && self.design.spacing.is_finite()) {
            return bad("design.spacing must be positive".into());
        }
        let m = match &self.model {
            ModelSpec::Ridge { direction, .. } => direction.len(),
            ModelSpec::Quadratic { matrix, diagonal, .. } => {
                matrix.as_ref().map(Vec::len).or(diagonal.as_ref().map(Vec::len)).unwrap_or(0)
            }
            ModelSpec::Elliptic { beta, terms, .. } => {
                if !(*beta > 0.0 && beta.is_finite()) {
                    return bad("elliptic beta must be positive".into());
                }
                *terms
            }
        };
        if self.n >= m {
            return bad(format!("n = {} must be smaller than the input dimension {m}", self.n));
        }
        Ok(())
    }
}
