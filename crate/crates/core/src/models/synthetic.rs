//! A model whose bias, variance decay and cost growth follow prescribed
//! power laws exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ModelError, ProblemDescriptor, SampleOutput, SampleProblem};

/// Parameters of the synthetic model.
///
/// `Q_j = q_bar + c_alpha h_j^alpha + sqrt(v0) xi_0 + sum_{i=1..j} sqrt(c_beta h_i^beta) xi_i`
/// with `h_j = h0 2^-j` and independent standard normals `xi_i`, so that
/// `E[Q_l] - q_bar = c_alpha h_l^alpha` and `Var[Q_l - Q_{l-1}] = c_beta h_l^beta`.
/// One sample on level `l` costs `c_gamma h_l^-gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub q_bar: f64,
    pub c_alpha: f64,
    pub alpha: f64,
    pub c_beta: f64,
    pub beta: f64,
    pub c_gamma: f64,
    pub gamma: f64,
    pub v0: f64,
    pub h0: f64,
    pub dimension: usize,
    /// Standard deviation of a mean-one log-normal factor applied to the
    /// cost of every sample; `0` keeps costs deterministic.
    pub cost_jitter: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            q_bar: 1.0,
            c_alpha: 1.0,
            alpha: 2.0,
            c_beta: 1.0,
            beta: 4.0,
            c_gamma: 1.0,
            gamma: 3.0,
            v0: 1.0,
            h0: 0.25,
            dimension: 2,
            cost_jitter: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn with_rates(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            ..Self::default()
        }
    }

    pub fn width(&self, level: usize) -> f64 {
        self.h0 * (-(level as f64)).exp2()
    }

    /// `E[Q_l] - q_bar`.
    pub fn bias(&self, level: usize) -> f64 {
        self.c_alpha * self.width(level).powf(self.alpha)
    }

    /// `E[Y_l]`, with `Y_0 = Q_0`.
    pub fn mean_difference(&self, level: usize) -> f64 {
        if level == 0 {
            self.q_bar + self.bias(0)
        } else {
            self.bias(level) - self.bias(level - 1)
        }
    }

    /// `Var[Y_l]`, with `Y_0 = Q_0`.
    pub fn difference_variance(&self, level: usize) -> f64 {
        if level == 0 {
            self.v0
        } else {
            self.c_beta * self.width(level).powf(self.beta)
        }
    }

    pub fn cost(&self, level: usize) -> f64 {
        self.c_gamma * self.width(level).powf(-self.gamma)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticModel {
    spec: SyntheticSpec,
    /// `sqrt(Var[Y_i])` for the increments, indexed by level.
    scales: Vec<f64>,
}

/// Levels beyond this are never requested in practice; the scale table is
/// extended lazily past it.
const PRECOMPUTED_LEVELS: usize = 32;

impl SyntheticModel {
    pub fn new(spec: SyntheticSpec) -> Result<Self, ModelError> {
        let positive = [
            ("c_alpha", spec.c_alpha),
            ("alpha", spec.alpha),
            ("c_beta", spec.c_beta),
            ("beta", spec.beta),
            ("c_gamma", spec.c_gamma),
            ("gamma", spec.gamma),
            ("h0", spec.h0),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::InvalidSpec(format!(
                    "synthetic {name} must be positive, got {value}"
                )));
            }
        }
        if !(spec.v0 >= 0.0) || !(spec.cost_jitter >= 0.0) {
            return Err(ModelError::InvalidSpec(
                "synthetic v0 and cost_jitter must be non-negative".into(),
            ));
        }
        let scales = (0..PRECOMPUTED_LEVELS)
            .map(|l| spec.difference_variance(l).sqrt())
            .collect();
        Ok(Self { spec, scales })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    fn scale(&self, level: usize) -> f64 {
        self.scales
            .get(level)
            .copied()
            .unwrap_or_else(|| self.spec.difference_variance(level).sqrt())
    }
}

impl SampleProblem for SyntheticModel {
    fn descriptor(&self) -> ProblemDescriptor {
        ProblemDescriptor {
            dimension: self.spec.dimension,
            coarsest_width: self.spec.h0,
        }
    }

    fn evaluate(&self, level: usize, seed: u64) -> Result<SampleOutput, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = 0.0;
        let mut noise_coarse = 0.0;
        for i in 0..=level {
            let xi: f64 = StandardNormal.sample(&mut rng);
            if i == level {
                noise_coarse = noise;
            }
            noise += self.scale(i) * xi;
        }
        let q_fine = self.spec.q_bar + self.spec.bias(level) + noise;
        let q_coarse = if level == 0 {
            0.0
        } else {
            self.spec.q_bar + self.spec.bias(level - 1) + noise_coarse
        };
        let mut cost = self.spec.cost(level);
        if self.spec.cost_jitter > 0.0 {
            let s = self.spec.cost_jitter;
            let xi: f64 = StandardNormal.sample(&mut rng);
            cost *= (s * xi - 0.5 * s * s).exp();
        }
        Ok(SampleOutput {
            q_fine,
            q_coarse,
            cost,
        })
    }

    fn modeled_cost(&self, level: usize) -> Option<f64> {
        (self.spec.cost_jitter == 0.0).then(|| self.spec.cost(level))
    }
}
