//! Mergeable per-level sample statistics.
//!
//! Every quantity the controller consumes (sample counts, means of `Q_l` and
//! `Y_l = Q_l - Q_{l-1}`, centered second moments and mean cost) lives in a
//! [`LevelAccumulator`]. Accumulators are combined with the pairwise update of
//! Chan et al., which is what makes per-worker, per-wave and per-round
//! reductions interchangeable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Online statistics for one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAccumulator {
    pub level: usize,
    pub count: u64,
    pub mean_q: f64,
    /// Centered second moment `sum (Q - mean_q)^2`.
    pub s2_q: f64,
    pub mean_y: f64,
    /// Centered second moment `sum (Y - mean_y)^2`.
    pub s2_y: f64,
    pub mean_cost: f64,
    pub total_cost: f64,
}

impl LevelAccumulator {
    pub fn new(level: usize) -> Self {
        Self {
            level,
            count: 0,
            mean_q: 0.0,
            s2_q: 0.0,
            mean_y: 0.0,
            s2_y: 0.0,
            mean_cost: 0.0,
            total_cost: 0.0,
        }
    }

    /// Builds an accumulator directly from its moments.
    ///
    /// Used to seed estimator inputs and to restore summaries produced
    /// elsewhere; `s2_*` are centered sums, not variances.
    pub fn from_moments(
        level: usize,
        count: u64,
        mean_q: f64,
        s2_q: f64,
        mean_y: f64,
        s2_y: f64,
        mean_cost: f64,
    ) -> Self {
        Self {
            level,
            count,
            mean_q,
            s2_q,
            mean_y,
            s2_y,
            mean_cost,
            total_cost: mean_cost * count as f64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Adds one sample. On level 0 the coarse value must be exactly zero so
    /// that `Y_0 = Q_0`.
    pub fn accumulate(&mut self, q_fine: f64, q_coarse: f64, cost: f64) -> Result<()> {
        for (what, value) in [("q_fine", q_fine), ("q_coarse", q_coarse), ("cost", cost)] {
            if !value.is_finite() {
                return Err(Error::NonFiniteSample {
                    level: self.level,
                    what,
                    value,
                });
            }
        }
        if cost < 0.0 {
            return Err(Error::Contract(format!("negative sample cost {cost}")));
        }
        if self.level == 0 && q_coarse != 0.0 {
            return Err(Error::Contract(format!(
                "level 0 has no coarse partner, got q_coarse = {q_coarse}"
            )));
        }

        self.count += 1;
        let n = self.count as f64;
        let y = q_fine - q_coarse;

        let dq = q_fine - self.mean_q;
        self.mean_q += dq / n;
        self.s2_q += dq * (q_fine - self.mean_q);

        let dy = y - self.mean_y;
        self.mean_y += dy / n;
        self.s2_y += dy * (y - self.mean_y);

        self.mean_cost += (cost - self.mean_cost) / n;
        self.total_cost += cost;
        Ok(())
    }

    /// Pairwise combination of two accumulators of the same level.
    ///
    /// An empty operand is an exact identity: the other side is returned
    /// unchanged.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.level != other.level {
            return Err(Error::LevelMismatch {
                left: self.level,
                right: other.level,
            });
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }

        let count = self.count + other.count;
        let total = count as f64;
        let wa = self.count as f64;
        let wb = other.count as f64;
        let cross = wa * wb / total;

        let dq = other.mean_q - self.mean_q;
        let dy = other.mean_y - self.mean_y;
        let dc = other.mean_cost - self.mean_cost;

        Ok(Self {
            level: self.level,
            count,
            mean_q: self.mean_q + (wb / total) * dq,
            s2_q: self.s2_q + other.s2_q + cross * dq * dq,
            mean_y: self.mean_y + (wb / total) * dy,
            s2_y: self.s2_y + other.s2_y + cross * dy * dy,
            mean_cost: self.mean_cost + (wb / total) * dc,
            total_cost: self.total_cost + other.total_cost,
        })
    }

    pub fn merge_from(&mut self, other: &Self) -> Result<()> {
        *self = self.merge(other)?;
        Ok(())
    }

    /// Sample variance `s^2_Y = S_{Y,2} / (M - 1)`.
    pub fn sample_variance(&self) -> Result<f64> {
        self.check_sampled()?;
        Ok(self.s2_y / (self.count - 1) as f64)
    }

    /// Sample variance of `Q_l` itself.
    pub fn sample_variance_q(&self) -> Result<f64> {
        self.check_sampled()?;
        Ok(self.s2_q / (self.count - 1) as f64)
    }

    fn check_sampled(&self) -> Result<()> {
        if self.count < 2 {
            Err(Error::UndefinedVariance {
                level: self.level,
                count: self.count,
            })
        } else {
            Ok(())
        }
    }
}

/// Per-level accumulators for levels `0..=L` plus the estimation-round index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MlmcDataset {
    pub levels: Vec<LevelAccumulator>,
    pub round: u64,
}

impl MlmcDataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty accumulators for levels `0..n_levels`.
    pub fn with_levels(n_levels: usize) -> Self {
        Self {
            levels: (0..n_levels).map(LevelAccumulator::new).collect(),
            round: 0,
        }
    }

    pub fn from_levels(levels: Vec<LevelAccumulator>) -> Result<Self> {
        for (i, acc) in levels.iter().enumerate() {
            if acc.level != i {
                return Err(Error::Contract(format!(
                    "levels must be contiguous from 0, found level {} at position {i}",
                    acc.level
                )));
            }
        }
        Ok(Self { levels, round: 0 })
    }

    pub fn is_empty(&self) -> bool {
        self.levels.iter().all(LevelAccumulator::is_empty)
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Index `L` of the finest level, if any level exists.
    pub fn top_level(&self) -> Option<usize> {
        self.levels.len().checked_sub(1)
    }

    pub fn level(&self, level: usize) -> Option<&LevelAccumulator> {
        self.levels.get(level)
    }

    /// Grows the level range so that `level` exists.
    pub fn ensure_level(&mut self, level: usize) -> &mut LevelAccumulator {
        while self.levels.len() <= level {
            let next = self.levels.len();
            self.levels.push(LevelAccumulator::new(next));
        }
        &mut self.levels[level]
    }

    pub fn counts(&self) -> Vec<u64> {
        self.levels.iter().map(|a| a.count).collect()
    }

    pub fn total_samples(&self) -> u64 {
        self.levels.iter().map(|a| a.count).sum()
    }

    /// The telescoping estimate `sum_l mean(Y_l)`.
    pub fn estimate(&self) -> f64 {
        self.levels.iter().map(|a| a.mean_y).sum()
    }

    /// Merges a round's delta into accumulated data and advances the round
    /// index. Levels present only in `delta` extend the range.
    pub fn merge(&self, delta: &Self) -> Result<Self> {
        let n = self.levels.len().max(delta.levels.len());
        let mut levels = Vec::with_capacity(n);
        for l in 0..n {
            let merged = match (self.levels.get(l), delta.levels.get(l)) {
                (Some(a), Some(b)) => a.merge(b)?,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            };
            levels.push(merged);
        }
        Ok(Self {
            levels,
            round: self.round.max(delta.round) + 1,
        })
    }

    pub fn to_checkpoint_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let data: Self = serde_json::from_str(text)?;
        Self::from_levels(data.levels.clone())?;
        Ok(data)
    }
}

/// Free-function form of [`MlmcDataset::merge`].
pub fn merge_datasets(old: &MlmcDataset, delta: &MlmcDataset) -> Result<MlmcDataset> {
    old.merge(delta)
}

/// Reduces a slice of accumulators with a fixed-shape binary tree.
///
/// The shape depends only on `items.len()`, so the floating-point result is
/// the same no matter which thread produced which leaf.
pub fn tree_reduce(items: &[LevelAccumulator], level: usize) -> Result<LevelAccumulator> {
    match items.len() {
        0 => Ok(LevelAccumulator::new(level)),
        1 => Ok(items[0].clone()),
        n => {
            let (left, right) = items.split_at(n / 2);
            tree_reduce(left, level)?.merge(&tree_reduce(right, level)?)
        }
    }
}
