//! Rate fits, error estimates and optimal sample allocations computed from
//! accumulated level statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::MlmcDataset;

/// Fitted rates `(alpha, beta, gamma)` with their constants.
///
/// Constants are expressed per level index: `|Y_l| ~ c_alpha 2^{-alpha l}`,
/// `s^2_{Y_l} ~ c_beta 2^{-beta l}` and `C_l ~ c_gamma 2^{gamma l}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub alpha_hat: f64,
    pub c_alpha_hat: f64,
    pub beta_hat: f64,
    pub c_beta_hat: f64,
    pub gamma_hat: f64,
    pub c_gamma_hat: f64,
    pub alpha_defaulted: bool,
    pub beta_defaulted: bool,
    pub gamma_defaulted: bool,
    /// Set when any fitted rate was pulled back into the admissible range.
    pub clamped: bool,
}

impl RateEstimate {
    pub fn defaulted(&self) -> bool {
        self.alpha_defaulted || self.beta_defaulted || self.gamma_defaulted
    }
}

/// Fallback rates and the clamping range applied to fitted rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFitConfig {
    pub fallback_alpha: f64,
    pub fallback_beta: f64,
    pub fallback_gamma: f64,
    pub min_rate: f64,
    pub max_rate: f64,
}

impl RateFitConfig {
    /// Fallbacks `(1, 1, D + 1)` for a problem of spatial dimension `D`.
    pub fn for_dimension(dimension: usize) -> Self {
        Self {
            fallback_alpha: 1.0,
            fallback_beta: 1.0,
            fallback_gamma: dimension as f64 + 1.0,
            min_rate: 0.05,
            max_rate: 10.0,
        }
    }
}

impl Default for RateFitConfig {
    fn default() -> Self {
        Self::for_dimension(1)
    }
}

#[derive(Debug, Clone, Copy)]
struct LineFit {
    slope: f64,
    intercept: f64,
}

fn least_squares_line(points: &[(f64, f64)]) -> Option<LineFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Fits a decay (or growth) rate in log2 space and returns
/// `(rate, constant, defaulted, clamped)`.
fn fit_rate(
    points: &[(f64, f64)],
    growth: bool,
    fallback: f64,
    cfg: &RateFitConfig,
) -> (f64, f64, bool, bool) {
    let Some(line) = least_squares_line(points) else {
        let constant = points
            .first()
            .map(|&(l, y)| {
                let sign = if growth { -1.0 } else { 1.0 };
                (y + sign * fallback * l).exp2()
            })
            .unwrap_or(1.0);
        return (fallback, constant, true, false);
    };
    let raw = if growth { line.slope } else { -line.slope };
    if !raw.is_finite() {
        return (fallback, 1.0, true, false);
    }
    let rate = raw.clamp(cfg.min_rate, cfg.max_rate);
    let clamped = rate != raw;
    let intercept = if clamped {
        // Least-squares intercept for the clamped slope.
        let slope = if growth { rate } else { -rate };
        points.iter().map(|&(x, y)| y - slope * x).sum::<f64>() / points.len() as f64
    } else {
        line.intercept
    };
    (rate, intercept.exp2(), false, clamped)
}

/// Least-squares fits of `log2 |Y_l|` (levels `1..=L`), `log2 s^2_{Y_l}`
/// (levels `1..=L`) and `log2 C_l` (levels `0..=L`) against `l`.
pub fn fit_rates(data: &MlmcDataset, cfg: &RateFitConfig) -> RateEstimate {
    let mut mean_pts = Vec::new();
    let mut var_pts = Vec::new();
    let mut cost_pts = Vec::new();
    for acc in &data.levels {
        let l = acc.level as f64;
        if acc.count >= 1 && acc.mean_cost > 0.0 {
            cost_pts.push((l, acc.mean_cost.log2()));
        }
        if acc.level == 0 || acc.count < 2 {
            continue;
        }
        if acc.mean_y != 0.0 {
            mean_pts.push((l, acc.mean_y.abs().log2()));
        }
        if let Ok(v) = acc.sample_variance() {
            if v > 0.0 {
                var_pts.push((l, v.log2()));
            }
        }
    }

    let (alpha_hat, c_alpha_hat, alpha_defaulted, ca) =
        fit_rate(&mean_pts, false, cfg.fallback_alpha, cfg);
    let (beta_hat, c_beta_hat, beta_defaulted, cb) =
        fit_rate(&var_pts, false, cfg.fallback_beta, cfg);
    let (gamma_hat, c_gamma_hat, gamma_defaulted, cg) =
        fit_rate(&cost_pts, true, cfg.fallback_gamma, cfg);

    RateEstimate {
        alpha_hat,
        c_alpha_hat,
        beta_hat,
        c_beta_hat,
        gamma_hat,
        c_gamma_hat,
        alpha_defaulted,
        beta_defaulted,
        gamma_defaulted,
        clamped: ca || cb || cg,
    }
}

/// Bias estimate `max_l |Y_l| / (2^alpha - 1) * 2^{-alpha (L - l)}` over
/// `l = 1..=L`. With a single level there is nothing to extrapolate from and
/// the result is `+inf`.
pub fn estimate_bias(data: &MlmcDataset, alpha_hat: f64) -> f64 {
    let Some(top) = data.top_level() else {
        return f64::INFINITY;
    };
    if top == 0 {
        return f64::INFINITY;
    }
    let denom = alpha_hat.exp2() - 1.0;
    data.levels[1..]
        .iter()
        .map(|acc| acc.mean_y.abs() / denom * (-alpha_hat * (top - acc.level) as f64).exp2())
        .fold(0.0, f64::max)
}

/// Estimator variance `sum_l s^2_{Y_l} / M_l`.
pub fn estimate_input_error(data: &MlmcDataset) -> Result<f64> {
    data.levels.iter().try_fold(0.0, |sum, acc| {
        Ok(sum + acc.sample_variance()? / acc.count as f64)
    })
}

/// `sum_l V_l / M_l` for explicit variances and counts.
pub fn input_error_from(variances: &[f64], counts: &[u64]) -> f64 {
    variances
        .iter()
        .zip(counts)
        .map(|(v, &m)| v / m as f64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub err_disc: f64,
    pub err_input: f64,
    pub err_mse: f64,
    pub err_rmse: f64,
}

impl ErrorEstimate {
    pub fn from_parts(err_disc: f64, err_input: f64) -> Self {
        let err_mse = err_input + err_disc * err_disc;
        Self {
            err_disc,
            err_input,
            err_mse,
            err_rmse: err_mse.sqrt(),
        }
    }
}

pub fn estimate_mse(data: &MlmcDataset, rates: &RateEstimate) -> Result<ErrorEstimate> {
    let err_input = estimate_input_error(data)?;
    let err_disc = estimate_bias(data, rates.alpha_hat);
    Ok(ErrorEstimate::from_parts(err_disc, err_input))
}

/// Per-level sample counts minimizing `sum M_l C_l` subject to
/// `sum V_l / M_l = theta eps^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub m_opt: Vec<u64>,
    /// The continuous optimizer before taking ceilings.
    pub continuous: Vec<f64>,
    /// Cost of the samples still missing: `sum_l max(m_opt_l - M_l, 0) C_l`.
    pub predicted_cost: f64,
}

/// Continuous minimizer of `sum M_l C_l` s.t. `sum V_l / M_l = theta eps^2`.
pub fn continuous_allocation(
    variances: &[f64],
    costs: &[f64],
    epsilon: f64,
    theta: f64,
) -> Vec<f64> {
    let sum: f64 = variances
        .iter()
        .zip(costs)
        .map(|(v, c)| (v * c).sqrt())
        .sum();
    let prefactor = 1.0 / (theta * epsilon * epsilon);
    variances
        .iter()
        .zip(costs)
        .map(|(v, c)| prefactor * (v / c).sqrt() * sum)
        .collect()
}

pub fn optimal_samples(data: &MlmcDataset, epsilon: f64, theta: f64) -> Result<Allocation> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Contract(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Contract(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    let mut variances = Vec::with_capacity(data.n_levels());
    let mut costs = Vec::with_capacity(data.n_levels());
    for acc in &data.levels {
        variances.push(acc.sample_variance()?);
        if !(acc.mean_cost > 0.0) {
            return Err(Error::Contract(format!(
                "level {} has no positive mean cost",
                acc.level
            )));
        }
        costs.push(acc.mean_cost);
    }
    let continuous = continuous_allocation(&variances, &costs, epsilon, theta);
    let m_opt: Vec<u64> = continuous
        .iter()
        .map(|&m| {
            let m = m.ceil();
            if m >= u64::MAX as f64 {
                u64::MAX
            } else {
                (m as u64).max(1)
            }
        })
        .collect();
    let predicted_cost = data
        .levels
        .iter()
        .zip(&m_opt)
        .map(|(acc, &m)| m.saturating_sub(acc.count) as f64 * acc.mean_cost)
        .sum();
    Ok(Allocation {
        m_opt,
        continuous,
        predicted_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPrediction {
    pub delta: f64,
    /// `beta == gamma`: the returned exponent is the `beta < gamma` limit.
    pub boundary: bool,
}

/// Exponent `delta` in `eps ~ B^{-delta}`: `1/2` for `beta > gamma`,
/// `alpha / (2 alpha + gamma - beta)` for `beta < gamma`.
pub fn theoretical_delta(alpha: f64, beta: f64, gamma: f64) -> DeltaPrediction {
    if beta > gamma {
        DeltaPrediction {
            delta: 0.5,
            boundary: false,
        }
    } else if beta < gamma {
        DeltaPrediction {
            delta: alpha / (2.0 * alpha + (gamma - beta)),
            boundary: false,
        }
    } else {
        DeltaPrediction {
            delta: 0.5,
            boundary: true,
        }
    }
}
