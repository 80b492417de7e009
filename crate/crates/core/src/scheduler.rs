//! Distribution of sample evaluations onto groups of processing units.
//!
//! A level with `r` outstanding samples on `p` units is processed in waves.
//! While `r >= p`, a wave runs `p` samples on one unit each. The remaining
//! `r < p` samples form a last wave in which every sample gets a group of
//! `2^k` units, `k` being the largest exponent with `2^k <= p / r`.
//! Running a sample on `2^k` units is modeled as a speedup of `2^{k sigma}`.

use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelError, SampleProblem};
use crate::seed::sample_seed;
use crate::stats::{tree_reduce, LevelAccumulator, MlmcDataset};

/// Largest `k` with `2^k <= p_size / m`; `0` when `m >= p_size`.
pub fn split_exponent(p_size: u64, m: u64) -> u32 {
    assert!(m >= 1, "split_exponent needs at least one sample");
    if m >= p_size {
        0
    } else {
        (p_size / m).ilog2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    /// Budget is charged as units times wall span of the simulated cluster.
    Simulated,
    /// Budget is charged as the sum of per-sample costs.
    Threaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// Per-sample costs come from the model's deterministic cost.
    Modeled,
    /// Per-sample costs are measured wall-clock seconds.
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerConfig {
    /// Number of simulated processing units; a power of two.
    pub p_size: u64,
    /// Parallel efficiency exponent of a single sample solve.
    pub sigma_eff: f64,
    pub mode: ExecutionMode,
    /// Real worker threads used to evaluate samples.
    pub workers: usize,
    /// Wall time every round spends synchronizing all units.
    pub sync_cost: f64,
    /// Record one trace row per sample.
    pub trace: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            p_size: 1,
            sigma_eff: 0.9,
            mode: ExecutionMode::Simulated,
            workers: 1,
            sync_cost: 0.0,
            trace: false,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.p_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "p_size must be a power of two, got {}",
                self.p_size
            )));
        }
        if !(0.0..=1.0).contains(&self.sigma_eff) {
            return Err(Error::InvalidConfig(format!(
                "sigma_eff must lie in [0, 1], got {}",
                self.sigma_eff
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if !(self.sync_cost >= 0.0) {
            return Err(Error::InvalidConfig(
                "sync_cost must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Modeled speedup of one sample run on `2^k` units.
    pub fn speedup(&self, k: u32) -> f64 {
        (k as f64 * self.sigma_eff).exp2()
    }
}

/// One sample together with the units it occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleGroup {
    /// Position of the group within its wave.
    pub group_id: u64,
    pub units: Range<u64>,
    /// Ordinal of the sample among all samples ever drawn on its level.
    pub sample: u64,
    pub level: usize,
    pub seed: u64,
}

/// A set of samples processed concurrently on disjoint groups of `2^k` units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wave {
    pub level: usize,
    pub index: u64,
    pub k: u32,
    pub groups: u64,
    pub first_sample: u64,
}

impl Wave {
    pub fn group_size(&self) -> u64 {
        1 << self.k
    }

    pub fn sample_groups(&self, master_seed: u64) -> impl Iterator<Item = SampleGroup> + '_ {
        let size = self.group_size();
        (0..self.groups).map(move |g| {
            let sample = self.first_sample + g;
            SampleGroup {
                group_id: g,
                units: g * size..(g + 1) * size,
                sample,
                level: self.level,
                seed: sample_seed(master_seed, self.level, sample),
            }
        })
    }
}

/// Waves for one level, generated on demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub level: usize,
    pub samples: u64,
    /// Ordinal of the first new sample, i.e. the samples already drawn.
    pub offset: u64,
    pub full_waves: u64,
    /// `(groups, k)` of the final wave with fewer than `p` samples.
    pub partial: Option<(u64, u32)>,
}

impl LevelSchedule {
    fn new(p_size: u64, level: usize, samples: u64, offset: u64) -> Self {
        let full_waves = samples / p_size;
        let rest = samples % p_size;
        Self {
            level,
            samples,
            offset,
            full_waves,
            partial: (rest > 0).then(|| (rest, split_exponent(p_size, rest))),
        }
    }

    pub fn n_waves(&self) -> u64 {
        self.full_waves + self.partial.is_some() as u64
    }

    pub fn wave(&self, p_size: u64, index: u64) -> Wave {
        if index < self.full_waves {
            Wave {
                level: self.level,
                index,
                k: 0,
                groups: p_size,
                first_sample: self.offset + index * p_size,
            }
        } else {
            let (groups, k) = self.partial.expect("wave index out of range");
            Wave {
                level: self.level,
                index,
                k,
                groups,
                first_sample: self.offset + self.full_waves * p_size,
            }
        }
    }

    pub fn waves(&self, p_size: u64) -> impl Iterator<Item = Wave> + '_ {
        (0..self.n_waves()).map(move |i| self.wave(p_size, i))
    }
}

/// Per-level wave schedules in descending level order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub p_size: u64,
    pub levels: Vec<LevelSchedule>,
}

impl SchedulePlan {
    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn total_samples(&self) -> u64 {
        self.levels.iter().map(|l| l.samples).sum()
    }
}

/// Plan for `delta_m[l]` new samples on each level, numbering them from zero.
pub fn build_plan(p_size: u64, delta_m: &[u64]) -> SchedulePlan {
    build_plan_with_offsets(p_size, delta_m, &vec![0; delta_m.len()])
}

/// Plan whose sample ordinals on level `l` start at `offsets[l]`.
pub fn build_plan_with_offsets(p_size: u64, delta_m: &[u64], offsets: &[u64]) -> SchedulePlan {
    assert!(p_size.is_power_of_two(), "p_size must be a power of two");
    let levels = (0..delta_m.len())
        .rev()
        .filter(|&l| delta_m[l] > 0)
        .map(|l| LevelSchedule::new(p_size, l, delta_m[l], offsets.get(l).copied().unwrap_or(0)))
        .collect();
    SchedulePlan { p_size, levels }
}

/// Work and loss bookkeeping for one level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelCost {
    pub level: usize,
    pub samples: u64,
    pub waves: u64,
    /// Sum of per-sample costs as if each ran on one unit.
    pub sample_cost: f64,
    /// Sum over waves of the longest group time.
    pub span: f64,
    /// Units times time spent running samples.
    pub busy: f64,
    /// Units times time spent waiting for the slowest group of a wave.
    pub idle: f64,
    /// Extra unit time caused by imperfect parallel efficiency within groups.
    pub comm_loss: f64,
}

/// Cost bookkeeping of one executed round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub levels: Vec<LevelCost>,
    /// Units times synchronization time at the round boundary.
    pub sync: f64,
    /// Budget charged for the round.
    pub consumed: f64,
}

impl CostRecord {
    pub fn span(&self) -> f64 {
        self.levels.iter().map(|l| l.span).sum()
    }

    pub fn sample_cost(&self) -> f64 {
        self.levels.iter().map(|l| l.sample_cost).sum()
    }

    pub fn idle(&self) -> f64 {
        self.levels.iter().map(|l| l.idle).sum()
    }

    pub fn comm_loss(&self) -> f64 {
        self.levels.iter().map(|l| l.comm_loss).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: u64,
    pub level: usize,
    pub wave: u64,
    pub group: u64,
    pub unit_start: u64,
    pub units: u64,
    pub sample: u64,
    pub seed: u64,
    pub cost: f64,
}

/// A failed sample, identified so that it can be reproduced.
#[derive(Debug)]
pub struct SampleFailure {
    pub level: usize,
    pub sample: u64,
    pub seed: u64,
    pub error: Error,
}

impl std::fmt::Display for SampleFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "sample {} on level {} (seed {:#018x}) failed: {}",
            self.sample, self.level, self.seed, self.error
        )
    }
}

#[derive(Debug)]
pub struct RoundOutput {
    pub delta: MlmcDataset,
    pub cost: CostRecord,
    pub trace: Vec<TraceRow>,
}

/// Samples per parallel task; a multiple of the wave width is used so that
/// each task holds whole waves.
const MIN_CHUNK_SAMPLES: u64 = 1024;

struct ChunkResult {
    acc: LevelAccumulator,
    span: f64,
    busy: f64,
    sample_cost: f64,
    trace: Vec<TraceRow>,
}

pub struct Scheduler {
    config: SchedulerConfig,
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for Scheduler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scheduler")
            .field("config", &self.config)
            .finish()
    }
}

impl Scheduler {
    pub fn new(config: SchedulerConfig) -> Result<Self> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
        Ok(Self { config, pool })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn p_size(&self) -> u64 {
        self.config.p_size
    }

    /// Budget a plan is expected to consume when every sample on level `l`
    /// costs `unit_costs[l]`.
    pub fn price(&self, delta_m: &[u64], unit_costs: &[f64]) -> f64 {
        self.charge(&build_plan(self.config.p_size, delta_m), |l| unit_costs[l])
    }

    /// Budget charged for `plan` when a sample on level `l` costs `cost(l)`.
    fn charge(&self, plan: &SchedulePlan, cost: impl Fn(usize) -> f64) -> f64 {
        if plan.is_empty() {
            return 0.0;
        }
        match self.config.mode {
            ExecutionMode::Threaded => plan
                .levels
                .iter()
                .map(|ls| ls.samples as f64 * cost(ls.level))
                .sum(),
            ExecutionMode::Simulated => {
                let span: f64 = plan
                    .levels
                    .iter()
                    .map(|ls| self.uniform_span(ls, cost(ls.level)))
                    .sum();
                plan.p_size as f64 * (span + self.config.sync_cost)
            }
        }
    }

    /// Wall span of a level whose samples all cost `c`.
    fn uniform_span(&self, ls: &LevelSchedule, c: f64) -> f64 {
        let partial = ls.partial.map_or(0.0, |(_, k)| c / self.config.speedup(k));
        ls.full_waves as f64 * c + partial
    }

    /// Evaluates all samples of `plan` and returns their statistics.
    ///
    /// Results do not depend on the number of workers: sample seeds derive
    /// from sample ordinals and partial statistics are combined in a fixed
    /// order.
    pub fn execute(
        &self,
        plan: &SchedulePlan,
        model: &dyn SampleProblem,
        master_seed: u64,
        cost_mode: CostMode,
        round: u64,
    ) -> std::result::Result<RoundOutput, SampleFailure> {
        let p = plan.p_size;
        let mut delta = MlmcDataset::new();
        let mut record = CostRecord::default();
        let mut trace = Vec::new();
        for ls in &plan.levels {
            let modeled = match cost_mode {
                CostMode::Modeled => model.modeled_cost(ls.level),
                CostMode::Measured => None,
            };
            let waves_per_chunk = MIN_CHUNK_SAMPLES.div_ceil(p).max(1);
            let n_waves = ls.n_waves();
            let chunks: Vec<Range<u64>> = (0..n_waves.div_ceil(waves_per_chunk))
                .map(|c| c * waves_per_chunk..((c + 1) * waves_per_chunk).min(n_waves))
                .collect();
            let results: Vec<std::result::Result<ChunkResult, SampleFailure>> =
                self.pool.install(|| {
                    use rayon::prelude::*;
                    chunks
                        .par_iter()
                        .map(|waves| {
                            self.run_chunk(
                                ls,
                                waves.clone(),
                                model,
                                master_seed,
                                modeled,
                                cost_mode,
                                round,
                            )
                        })
                        .collect()
                });
            let mut accs = Vec::with_capacity(results.len());
            let mut cost = LevelCost {
                level: ls.level,
                samples: ls.samples,
                waves: n_waves,
                ..LevelCost::default()
            };
            for r in results {
                let r = r?;
                cost.span += r.span;
                cost.busy += r.busy;
                cost.sample_cost += r.sample_cost;
                accs.push(r.acc);
                trace.extend(r.trace);
            }
            let acc = tree_reduce(&accs, ls.level).map_err(|error| SampleFailure {
                level: ls.level,
                sample: ls.offset,
                seed: sample_seed(master_seed, ls.level, ls.offset),
                error,
            })?;
            if let Some(c) = modeled {
                // Same arithmetic as `price`, so that charges match quotes exactly.
                cost.span = self.uniform_span(ls, c);
            }
            cost.idle = (p as f64 * cost.span - cost.busy).max(0.0);
            cost.comm_loss = (cost.busy - cost.sample_cost).max(0.0);
            *delta.ensure_level(ls.level) = acc;
            record.levels.push(cost);
        }
        if !plan.is_empty() {
            record.sync = p as f64 * self.config.sync_cost;
        }
        let all_modeled = cost_mode == CostMode::Modeled
            && plan
                .levels
                .iter()
                .all(|ls| model.modeled_cost(ls.level).is_some());
        record.consumed = if all_modeled {
            self.charge(plan, |l| model.modeled_cost(l).unwrap_or(0.0))
        } else {
            match self.config.mode {
                ExecutionMode::Threaded => record.sample_cost(),
                ExecutionMode::Simulated => p as f64 * (record.span() + self.config.sync_cost),
            }
        };
        Ok(RoundOutput {
            delta,
            cost: record,
            trace,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn run_chunk(
        &self,
        ls: &LevelSchedule,
        waves: Range<u64>,
        model: &dyn SampleProblem,
        master_seed: u64,
        modeled: Option<f64>,
        cost_mode: CostMode,
        round: u64,
    ) -> std::result::Result<ChunkResult, SampleFailure> {
        let mut out = ChunkResult {
            acc: LevelAccumulator::new(ls.level),
            span: 0.0,
            busy: 0.0,
            sample_cost: 0.0,
            trace: Vec::new(),
        };
        for w in waves {
            let wave = ls.wave(self.config.p_size, w);
            let speedup = self.config.speedup(wave.k);
            let size = wave.group_size() as f64;
            let mut longest: f64 = 0.0;
            for group in wave.sample_groups(master_seed) {
                let fail = |error: Error| SampleFailure {
                    level: group.level,
                    sample: group.sample,
                    seed: group.seed,
                    error,
                };
                let start = Instant::now();
                let s = model
                    .evaluate(group.level, group.seed)
                    .map_err(|e: ModelError| fail(e.into()))?;
                let cost = match (cost_mode, modeled) {
                    (CostMode::Measured, _) => start.elapsed().as_secs_f64(),
                    (CostMode::Modeled, Some(c)) => c,
                    (CostMode::Modeled, None) => s.cost,
                };
                out.acc
                    .accumulate(s.q_fine, s.q_coarse, cost)
                    .map_err(fail)?;
                let time = cost / speedup;
                longest = longest.max(time);
                out.busy += size * time;
                out.sample_cost += cost;
                if self.config.trace {
                    out.trace.push(TraceRow {
                        round,
                        level: group.level,
                        wave: wave.index,
                        group: group.group_id,
                        unit_start: group.units.start,
                        units: group.units.end - group.units.start,
                        sample: group.sample,
                        seed: group.seed,
                        cost,
                    });
                }
            }
            out.span += longest;
        }
        Ok(out)
    }
}

/// Fitted weak-scaling model `rmse_k = err_s + err_p 2^{k delta}`, where `k`
/// counts halvings of the processor count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub err_s: f64,
    pub err_p: f64,
    /// `None` when the data carry no information about the exponent.
    pub delta: Option<f64>,
    /// Sum of squared residuals.
    pub residual: f64,
}

/// Non-negative least squares for `y = a + b x` with `a, b >= 0`.
fn nnls_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let sse = |a: f64, b: f64| -> f64 {
        x.iter()
            .zip(y)
            .map(|(xi, yi)| (yi - a - b * xi).powi(2))
            .sum()
    };
    let mut candidates = Vec::with_capacity(3);
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx > 0.0 {
        let b = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (xi - mx) * (yi - my))
            .sum::<f64>()
            / sxx;
        let a = my - b * mx;
        if a >= 0.0 && b >= 0.0 {
            candidates.push((a, b));
        }
    }
    let xx: f64 = x.iter().map(|v| v * v).sum();
    if xx > 0.0 {
        let b = (x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / xx).max(0.0);
        candidates.push((0.0, b));
    }
    candidates.push((my.max(0.0), 0.0));
    candidates
        .into_iter()
        .map(|(a, b)| (a, b, sse(a, b)))
        .min_by(|u, v| u.2.total_cmp(&v.2))
        .expect("at least one candidate")
}

const DELTA_MAX: f64 = 4.0;
const DELTA_GRID: usize = 4000;

pub fn fit_weak_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Contract(format!(
            "weak-scaling fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut ks: Vec<f64> = points.iter().map(|p| p.0).collect();
    ks.sort_by(f64::total_cmp);
    if ks.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Contract(
            "weak-scaling fit needs distinct k values".into(),
        ));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Contract("weak-scaling points must be finite".into()));
    }
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * mean.abs().max(f64::MIN_POSITIVE) {
        return Ok(ScalingFit {
            err_s: mean,
            err_p: 0.0,
            delta: None,
            residual: y.iter().map(|v| (v - mean).powi(2)).sum(),
        });
    }

    let eval = |delta: f64| {
        let x: Vec<f64> = points.iter().map(|p| (p.0 * delta).exp2()).collect();
        nnls_line(&x, &y)
    };
    let step = DELTA_MAX / DELTA_GRID as f64;
    let best = (1..=DELTA_GRID)
        .map(|i| i as f64 * step)
        .min_by(|&a, &b| eval(a).2.total_cmp(&eval(b).2))
        .expect("non-empty grid");

    // Golden-section refinement around the best grid point.
    let (mut lo, mut hi) = ((best - step).max(0.0), (best + step).min(DELTA_MAX));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (eval(c).2, eval(d).2);
    for _ in 0..200 {
        if hi - lo < 1e-14 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = eval(c).2;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = eval(d).2;
        }
    }
    let delta = 0.5 * (lo + hi);
    let (err_s, err_p, residual) = eval(delta);
    Ok(ScalingFit {
        err_s,
        err_p,
        delta: (err_p > 0.0).then_some(delta),
        residual,
    })
}
