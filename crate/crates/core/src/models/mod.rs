//! Sample problems behind a common evaluation interface.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod banded;
pub mod field;
pub mod quadrature;
pub mod synthetic;
pub mod wave1d;

pub use field::{CovSpec, FieldSampler};
pub use synthetic::{SyntheticModel, SyntheticSpec};
pub use wave1d::{Wave1d, Wave1dSpec};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("sample diverged on level {level} (seed {seed:#018x}): {detail}")]
    Diverged {
        level: usize,
        seed: u64,
        detail: String,
    },

    #[error("circulant embedding clipped {clipped_fraction:.3} of the spectral mass after {doublings} doublings; use a larger embedding or a smoother covariance")]
    Embedding {
        clipped_fraction: f64,
        doublings: u32,
    },

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
}

/// Static properties of a problem's discretization hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    pub dimension: usize,
    /// Mesh width on level 0; level `l` uses `coarsest_width * 2^-l`.
    pub coarsest_width: f64,
}

impl ProblemDescriptor {
    pub fn width(&self, level: usize) -> f64 {
        self.coarsest_width * (-(level as f64)).exp2()
    }
}

/// Fine and coarse quantity of interest computed from one input sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOutput {
    pub q_fine: f64,
    /// Zero on level 0.
    pub q_coarse: f64,
    pub cost: f64,
}

pub trait SampleProblem: Send + Sync {
    fn descriptor(&self) -> ProblemDescriptor;

    /// Evaluates `Q_l` and `Q_{l-1}` on the same random input drawn from `seed`.
    fn evaluate(&self, level: usize, seed: u64) -> Result<SampleOutput, ModelError>;

    /// Deterministic cost of one sample on `level`, if the problem has one.
    fn modeled_cost(&self, level: usize) -> Option<f64>;
}

/// Serializable choice of sample problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Synthetic(SyntheticSpec),
    Wave1d(Wave1dSpec),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn SampleProblem>, ModelError> {
        Ok(match self {
            ModelSpec::Synthetic(spec) => Box::new(SyntheticModel::new(spec.clone())?),
            ModelSpec::Wave1d(spec) => Box::new(Wave1d::new(spec.clone())?),
        })
    }
}
