//! Active subspace detection from sampled gradients and kriging response
//! surfaces on the reduced domain.

pub mod domain;
pub mod error;
pub mod kriging;
pub mod linalg;
pub mod models;
pub mod pipeline;
pub mod subspace;
pub mod surrogate;

pub use nalgebra;

pub use domain::{DensityKind, InputDomain, ReducedDomain};
pub use error::{Error, Result};
pub use kriging::{KrigingHyperparameters, KrigingModel};
pub use models::ModelFunction;
pub use subspace::{estimate_subspace, subspace_distance, ActiveSubspace, GradientSampleSet};
