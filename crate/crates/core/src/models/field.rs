//! Stationary Gaussian random fields on uniform 1D grids by circulant
//! embedding.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Covariance `sigma^2 exp(-(|d| / correlation_length)^smoothness)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovSpec {
    pub sigma: f64,
    pub correlation_length: f64,
    pub smoothness: f64,
}

impl Default for CovSpec {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            correlation_length: 0.15,
            smoothness: 1.8,
        }
    }
}

impl CovSpec {
    pub fn covariance(&self, distance: f64) -> f64 {
        self.sigma
            * self.sigma
            * (-(distance.abs() / self.correlation_length).powf(self.smoothness)).exp()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.sigma >= 0.0 && self.correlation_length > 0.0)
            || !(self.smoothness > 0.0 && self.smoothness <= 2.0)
        {
            return Err(ModelError::InvalidSpec(format!(
                "covariance needs sigma >= 0, correlation_length > 0 and 0 < smoothness <= 2, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Largest clipped share of the spectrum accepted without enlarging the
/// embedding.
const MAX_CLIPPED_FRACTION: f64 = 0.05;
const MAX_DOUBLINGS: u32 = 3;

/// Sampler for the Gaussian vector at `n` equispaced points.
pub struct FieldSampler {
    n: usize,
    /// `sqrt(lambda_j / m)` for the circulant eigenvalues `lambda_j`.
    amplitudes: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    clipped_fraction: f64,
}

impl std::fmt::Debug for FieldSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSampler")
            .field("n", &self.n)
            .field("embedding", &self.amplitudes.len())
            .field("clipped_fraction", &self.clipped_fraction)
            .finish()
    }
}

impl FieldSampler {
    pub fn new(cov: &CovSpec, n: usize, spacing: f64) -> Result<Self, ModelError> {
        cov.validate()?;
        if n == 0 || !(spacing > 0.0) {
            return Err(ModelError::InvalidSpec(format!(
                "field needs at least one point and positive spacing, got n={n}, spacing={spacing}"
            )));
        }
        let mut m = (2 * (n - 1)).max(1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let mut doublings = 0;
        loop {
            let fft = planner.plan_fft_forward(m);
            let mut row: Vec<Complex64> = (0..m)
                .map(|j| Complex64::new(cov.covariance(j.min(m - j) as f64 * spacing), 0.0))
                .collect();
            fft.process(&mut row);
            let total: f64 = row.iter().map(|z| z.re.abs()).sum();
            let clipped: f64 = row.iter().map(|z| (-z.re).max(0.0)).sum();
            let clipped_fraction = if total > 0.0 { clipped / total } else { 0.0 };
            if clipped_fraction <= MAX_CLIPPED_FRACTION {
                if clipped > 0.0 {
                    log::warn!(
                        "circulant embedding of size {m} clipped {:.2e} of the spectral mass",
                        clipped_fraction
                    );
                }
                let amplitudes = row
                    .iter()
                    .map(|z| (z.re.max(0.0) / m as f64).sqrt())
                    .collect();
                return Ok(Self {
                    n,
                    amplitudes,
                    fft,
                    clipped_fraction,
                });
            }
            if doublings == MAX_DOUBLINGS {
                return Err(ModelError::Embedding {
                    clipped_fraction,
                    doublings,
                });
            }
            doublings += 1;
            m *= 2;
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn embedding_size(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn clipped_fraction(&self) -> f64 {
        self.clipped_fraction
    }

    /// One realization of the mean-zero Gaussian vector.
    pub fn sample_gaussian<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut buf: Vec<Complex64> = self
            .amplitudes
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(a * re, a * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.truncate(self.n);
        buf.into_iter().map(|z| z.re).collect()
    }
}

/// Log-normal field `exp(g)` at the midpoints of `n_cells` equal cells of
/// the unit interval.
pub fn sample_field(cov: &CovSpec, n_cells: usize, seed: u64) -> Result<Vec<f64>, ModelError> {
    let sampler = FieldSampler::new(cov, n_cells, 1.0 / n_cells as f64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler
        .sample_gaussian(&mut rng)
        .into_iter()
        .map(f64::exp)
        .collect())
}
