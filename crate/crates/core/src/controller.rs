//! Budgeted estimation rounds.
//!
//! After an initial round on levels `L0..=0`, every round estimates the
//! current errors, plans additional samples (and possibly a new level) for a
//! target tolerance, prices the plan and either executes it or adjusts the
//! tolerance: a plan without work tightens it by `eta`, an unaffordable plan
//! relaxes it halfway back towards the tolerance of the last executed round.
//! When no tolerance up to the last executed one yields an affordable plan,
//! or the tolerance keeps ping-ponging, the rejected plan is scaled down to
//! what the remaining budget pays for and executed, so the budget is spent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    estimate_mse, fit_rates, optimal_samples, ErrorEstimate, RateEstimate, RateFitConfig,
};
use crate::models::SampleProblem;
use crate::scheduler::{build_plan_with_offsets, CostMode, CostRecord, Scheduler, TraceRow};
use crate::stats::MlmcDataset;

/// Method parameters of a budgeted run. Every field except `budget` may be
/// omitted when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BmlmcConfig {
    /// Total budget in cost units.
    pub budget: f64,
    /// Share of the squared tolerance assigned to the estimator variance.
    #[serde(default = "defaults::theta")]
    pub theta: f64,
    /// Tolerance reduction factor between rounds.
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    /// Samples of the initial round on levels `0..init_samples.len()`.
    #[serde(default = "defaults::init_samples")]
    pub init_samples: Vec<u64>,
    #[serde(default = "defaults::max_level")]
    pub max_level: usize,
    /// Stop once the estimated RMSE is at or below this value; `0` runs
    /// until the budget is spent.
    #[serde(default)]
    pub epsilon_min: f64,
    #[serde(default = "defaults::cost_mode")]
    pub cost_mode: CostMode,
    #[serde(default)]
    pub master_seed: u64,
    /// Tolerance changes in alternating directions tolerated without
    /// executing a round.
    #[serde(default = "defaults::max_alternations")]
    pub max_alternations: u32,
}

mod defaults {
    use crate::scheduler::CostMode;

    pub fn theta() -> f64 {
        0.5
    }
    pub fn eta() -> f64 {
        0.9
    }
    pub fn init_samples() -> Vec<u64> {
        vec![4096, 1024, 128, 32]
    }
    pub fn max_level() -> usize {
        12
    }
    pub fn cost_mode() -> CostMode {
        CostMode::Modeled
    }
    pub fn max_alternations() -> u32 {
        25
    }
}

impl Default for BmlmcConfig {
    fn default() -> Self {
        Self {
            budget: 1e6,
            theta: defaults::theta(),
            eta: defaults::eta(),
            init_samples: defaults::init_samples(),
            max_level: defaults::max_level(),
            epsilon_min: 0.0,
            cost_mode: defaults::cost_mode(),
            master_seed: 0,
            max_alternations: defaults::max_alternations(),
        }
    }
}

/// Consecutive relaxations without executing a round after which the run
/// stops: the plan keeps exceeding the budget even close to the last
/// executed tolerance.
const MAX_CONSECUTIVE_RELAXATIONS: u32 = 60;
/// Minimum number of samples seeding a new level.
const MIN_PILOT_SAMPLES: u64 = 8;

impl BmlmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return bad(format!("budget must be positive, got {}", self.budget));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if self.init_samples.is_empty() {
            return bad("init_samples must cover at least level 0".into());
        }
        if let Some(m) = self.init_samples.iter().find(|&&m| m < 2) {
            return bad(format!(
                "every initial level needs at least 2 samples, got {m}"
            ));
        }
        if self.init_levels() > self.max_level {
            return bad(format!(
                "max_level {} is below the initial top level {}",
                self.max_level,
                self.init_levels()
            ));
        }
        if !(self.epsilon_min >= 0.0) {
            return bad("epsilon_min must be non-negative".into());
        }
        if self.init_samples.windows(2).any(|w| w[1] > w[0]) {
            log::warn!(
                "initial sample sequence {:?} is not decreasing",
                self.init_samples
            );
        }
        Ok(())
    }

    /// Top level `L0` of the initial round.
    pub fn init_levels(&self) -> usize {
        self.init_samples.len() - 1
    }

    pub fn pilot_samples(&self) -> u64 {
        (self.init_samples.last().copied().unwrap_or(0) / 2).max(MIN_PILOT_SAMPLES)
    }
}

/// Budget bookkeeping; consumption is accumulated so that the total never
/// exceeds the initial budget for quoted plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub initial: f64,
    pub consumed: Vec<f64>,
    pub total_consumed: f64,
}

impl BudgetLedger {
    pub fn new(initial: f64) -> Self {
        Self {
            initial,
            consumed: Vec::new(),
            total_consumed: 0.0,
        }
    }

    pub fn remaining(&self) -> f64 {
        (self.initial - self.total_consumed).max(0.0)
    }

    /// Whether a quoted cost fits into what is left.
    pub fn affords(&self, cost: f64) -> bool {
        self.total_consumed + cost <= self.initial
    }

    pub fn charge(&mut self, cost: f64) {
        self.consumed.push(cost);
        self.total_consumed += cost;
    }

    /// Amount by which consumption exceeds the budget (measured costs only).
    pub fn overshoot(&self) -> f64 {
        (self.total_consumed - self.initial).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub target_epsilon: f64,
    /// Additional samples per level; one entry longer than the data when a
    /// level is added.
    pub delta_m: Vec<u64>,
    pub grow_level: bool,
    /// Bias dominates but the level cap forbids growth.
    pub bias_bound: bool,
    /// `sum_l delta_m[l] * C_l` with the per-sample cost estimates.
    pub predicted_cost: f64,
}

impl RoundPlan {
    pub fn is_empty(&self) -> bool {
        self.delta_m.iter().all(|&m| m == 0)
    }
}

/// Plans one round for tolerance `epsilon`.
///
/// `unit_costs` holds the cost estimate per level including one entry for
/// the level above the current top.
pub fn plan_round(
    data: &MlmcDataset,
    errors: &ErrorEstimate,
    epsilon: f64,
    theta: f64,
    allow_growth: bool,
    max_level: usize,
    pilot: u64,
    unit_costs: &[f64],
) -> Result<RoundPlan> {
    let n = data.n_levels();
    let mut delta_m = vec![0; n];
    let bias_dominant = errors.err_disc >= (1.0 - theta).sqrt() * epsilon;
    let top = n.saturating_sub(1);
    let grow_level = bias_dominant && allow_growth && top < max_level;
    let bias_bound = bias_dominant && top >= max_level;
    if grow_level {
        delta_m.push(pilot);
    }
    if errors.err_input >= theta * epsilon * epsilon {
        let alloc = optimal_samples(data, epsilon, theta)?;
        for (dm, (m_opt, acc)) in delta_m.iter_mut().zip(alloc.m_opt.iter().zip(&data.levels)) {
            *dm = m_opt.saturating_sub(acc.count);
        }
    }
    let predicted_cost = delta_m
        .iter()
        .zip(unit_costs)
        .map(|(&m, &c)| m as f64 * c)
        .sum();
    Ok(RoundPlan {
        target_epsilon: epsilon,
        delta_m,
        grow_level,
        bias_bound,
        predicted_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BudgetDecision {
    Proceed,
    Relax(f64),
    Tighten(f64),
    Stop,
}

/// Decides what to do with a plan quoted at `cost` when `remaining` budget is
/// left and the cheapest possible unit of work costs `cheapest`.
pub fn budget_decision(
    cost: f64,
    remaining: f64,
    cheapest: f64,
    epsilon: f64,
    epsilon_prev: f64,
    eta: f64,
) -> BudgetDecision {
    if remaining < cheapest {
        BudgetDecision::Stop
    } else if cost == 0.0 {
        BudgetDecision::Tighten(eta * epsilon)
    } else if cost > remaining {
        BudgetDecision::Relax(0.5 * (epsilon + epsilon_prev))
    } else {
        BudgetDecision::Proceed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    /// The remaining budget cannot pay for a single level-0 sample.
    BudgetExhausted,
    /// The estimated RMSE reached `epsilon_min`.
    TargetReached,
    /// The tolerance kept alternating between relaxing and tightening.
    OscillationGuard,
    /// No plan fits the remaining budget, not even scaled down to a single
    /// additional sample.
    Stalled,
    /// The initial round alone exceeds the budget; nothing was executed.
    InfeasibleInit { init_cost: f64 },
    Diverged {
        level: usize,
        sample: u64,
        seed: u64,
        message: String,
    },
}

/// State after an executed round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub epsilon: f64,
    pub top_level: usize,
    pub counts: Vec<u64>,
    pub delta_m: Vec<u64>,
    pub grew: bool,
    pub err_disc: f64,
    pub err_input: f64,
    pub err_rmse: f64,
    pub estimate: f64,
    pub predicted_cost: f64,
    pub consumed: f64,
    pub remaining: f64,
    /// Tolerance adjustments since the previous executed round.
    pub relaxations: u32,
    pub tightenings: u32,
    pub span: f64,
    pub idle: f64,
    pub comm_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub count: u64,
    pub mean_y: f64,
    pub variance_y: Option<f64>,
    pub mean_cost: f64,
    pub total_cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub span: f64,
    pub sample_cost: f64,
    pub idle: f64,
    pub comm_loss: f64,
    pub sync: f64,
}

impl LossSummary {
    fn add(&mut self, c: &CostRecord) {
        self.span += c.span();
        self.sample_cost += c.sample_cost();
        self.idle += c.idle();
        self.comm_loss += c.comm_loss();
        self.sync += c.sync;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub termination: Termination,
    pub rounds: Vec<RoundRecord>,
    pub estimate: f64,
    pub errors: Option<ErrorEstimate>,
    pub rates: Option<RateEstimate>,
    pub levels: Vec<LevelSummary>,
    pub budget: BudgetLedger,
    pub losses: LossSummary,
    /// The bias called for a level above `max_level` at least once.
    pub bias_bound: bool,
    /// Adding a level cost more than the remaining budget; later rounds only
    /// added samples to existing levels.
    pub growth_unaffordable: bool,
    pub data: MlmcDataset,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl RunReport {
    pub fn final_rmse(&self) -> Option<f64> {
        self.errors.map(|e| e.err_rmse)
    }

    pub fn consumed(&self) -> f64 {
        self.budget.total_consumed
    }
}

struct Controller<'a> {
    config: &'a BmlmcConfig,
    model: &'a dyn SampleProblem,
    scheduler: &'a Scheduler,
    fit: RateFitConfig,
    data: MlmcDataset,
    ledger: BudgetLedger,
    rounds: Vec<RoundRecord>,
    losses: LossSummary,
    trace: Vec<TraceRow>,
    rates: Option<RateEstimate>,
    errors: Option<ErrorEstimate>,
    bias_bound: bool,
    growth_unaffordable: bool,
}

impl Controller<'_> {
    /// Per-sample cost used for quotes on `level`.
    fn unit_cost(&self, level: usize) -> f64 {
        if self.config.cost_mode == CostMode::Modeled {
            if let Some(c) = self.model.modeled_cost(level) {
                return c;
            }
        }
        match self.data.level(level) {
            Some(acc) if acc.count > 0 => acc.mean_cost,
            _ => {
                let top = self.data.levels.last().expect("data has levels");
                let gamma = self.rates.map_or(self.fit.fallback_gamma, |r| r.gamma_hat);
                top.mean_cost * ((level - top.level) as f64 * gamma).exp2()
            }
        }
    }

    fn unit_costs(&self, levels: usize) -> Vec<f64> {
        (0..levels).map(|l| self.unit_cost(l)).collect()
    }

    fn execute(
        &mut self,
        delta_m: &[u64],
        epsilon: Option<f64>,
        predicted_cost: f64,
        adjustments: (u32, u32),
        observer: &mut dyn FnMut(&RoundRecord),
    ) -> std::result::Result<(), Termination> {
        let round = self.rounds.len() as u64;
        let offsets = self.data.counts();
        let plan = build_plan_with_offsets(self.scheduler.p_size(), delta_m, &offsets);
        let out = self
            .scheduler
            .execute(
                &plan,
                self.model,
                self.config.master_seed,
                self.config.cost_mode,
                round,
            )
            .map_err(|f| Termination::Diverged {
                level: f.level,
                sample: f.sample,
                seed: f.seed,
                message: f.error.to_string(),
            })?;
        let grew = delta_m.len() > self.data.n_levels();
        let merged = self
            .data
            .merge(&out.delta)
            .map_err(|e| Termination::Diverged {
                level: 0,
                sample: 0,
                seed: 0,
                message: e.to_string(),
            })?;
        self.data = merged;
        self.ledger.charge(out.cost.consumed);
        self.losses.add(&out.cost);
        self.trace.extend(out.trace);

        let rates = fit_rates(&self.data, &self.fit);
        let errors = estimate_mse(&self.data, &rates).map_err(|e| Termination::Diverged {
            level: 0,
            sample: 0,
            seed: 0,
            message: e.to_string(),
        })?;
        self.rates = Some(rates);
        self.errors = Some(errors);
        let record = RoundRecord {
            round,
            // The initial round has no target; its tolerance is what it achieved.
            epsilon: epsilon.unwrap_or(errors.err_rmse),
            top_level: self.data.top_level().unwrap_or(0),
            counts: self.data.counts(),
            delta_m: delta_m.to_vec(),
            grew,
            err_disc: errors.err_disc,
            err_input: errors.err_input,
            err_rmse: errors.err_rmse,
            estimate: self.data.estimate(),
            predicted_cost,
            consumed: out.cost.consumed,
            remaining: self.ledger.remaining(),
            relaxations: adjustments.0,
            tightenings: adjustments.1,
            span: out.cost.span(),
            idle: out.cost.idle(),
            comm_loss: out.cost.comm_loss(),
        };
        observer(&record);
        self.rounds.push(record);
        Ok(())
    }

    /// Plans a round for `eps` and quotes it. A new level whose pilot alone
    /// exceeds the remaining budget is dropped for the rest of the run.
    fn plan_for(
        &mut self,
        eps: f64,
        errors: &ErrorEstimate,
        costs: &[f64],
    ) -> std::result::Result<(RoundPlan, f64), Termination> {
        let n = self.data.n_levels();
        let pilot = self.config.pilot_samples();
        let mut plan = plan_round(
            &self.data,
            errors,
            eps,
            self.config.theta,
            !self.growth_unaffordable,
            self.config.max_level,
            pilot,
            costs,
        )
        .map_err(|e| Termination::Diverged {
            level: 0,
            sample: 0,
            seed: 0,
            message: e.to_string(),
        })?;
        self.bias_bound |= plan.bias_bound;
        if plan.grow_level {
            let mut pilot_only = vec![0; n];
            pilot_only.push(pilot);
            if !self
                .ledger
                .affords(self.scheduler.price(&pilot_only, costs))
            {
                log::info!(
                    "adding level {n} exceeds the remaining budget; continuing on {n} levels"
                );
                self.growth_unaffordable = true;
                plan.delta_m.pop();
                plan.grow_level = false;
                plan.predicted_cost -= pilot as f64 * costs[n];
            }
        }
        let quote = self.scheduler.price(&plan.delta_m, costs);
        Ok((plan, quote))
    }

    /// Executes the largest affordable fraction of an unaffordable plan.
    /// A pilot on a new level is kept whole. Returns `false` when not even
    /// one sample fits.
    fn fill(
        &mut self,
        plan: &RoundPlan,
        eps: f64,
        costs: &[f64],
        adjustments: (u32, u32),
        observer: &mut dyn FnMut(&RoundRecord),
    ) -> std::result::Result<bool, Termination> {
        let n = self.data.n_levels();
        let scaled = |f: f64| -> Vec<u64> {
            plan.delta_m
                .iter()
                .enumerate()
                .map(|(l, &m)| {
                    if l >= n {
                        m
                    } else {
                        (f * m as f64).floor() as u64
                    }
                })
                .collect()
        };
        let fits = |dm: &[u64]| self.ledger.affords(self.scheduler.price(dm, costs));
        let (mut lo, mut hi) = (0.0, 1.0);
        if !fits(&scaled(lo)) {
            return Ok(false);
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if fits(&scaled(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let delta_m = scaled(lo);
        if delta_m.iter().all(|&m| m == 0) {
            return Ok(false);
        }
        let predicted = delta_m.iter().zip(costs).map(|(&m, &c)| m as f64 * c).sum();
        self.execute(&delta_m, Some(eps), predicted, adjustments, observer)?;
        Ok(true)
    }

    fn run(&mut self, observer: &mut dyn FnMut(&RoundRecord)) -> Termination {
        let init = self.config.init_samples.clone();
        let init_costs = self.unit_costs(init.len());
        let init_quote = self.scheduler.price(&init, &init_costs);
        let quotable = self.config.cost_mode == CostMode::Modeled
            && (0..init.len()).all(|l| self.model.modeled_cost(l).is_some());
        if quotable && !self.ledger.affords(init_quote) {
            return Termination::InfeasibleInit {
                init_cost: init_quote,
            };
        }
        let init_predicted = init
            .iter()
            .zip(&init_costs)
            .map(|(&m, &c)| m as f64 * c)
            .sum();
        if let Err(t) = self.execute(&init, None, init_predicted, (0, 0), observer) {
            return t;
        }
        let mut eps_prev = self.rounds[0].epsilon;
        let mut eps = self.config.eta * eps_prev;

        let mut relaxations = 0u32;
        let mut tightenings = 0u32;
        let mut consecutive_relax = 0u32;
        let mut alternations = 0u32;
        let mut last_direction: Option<bool> = None;
        let mut over_budget: Option<(RoundPlan, f64)> = None;
        loop {
            let errors = self.errors.expect("errors after a round");
            let cheapest = self.scheduler.price(&[1], &[self.unit_cost(0)]);
            if self.ledger.remaining() < cheapest {
                return Termination::BudgetExhausted;
            }
            if self.config.epsilon_min > 0.0 && errors.err_rmse <= self.config.epsilon_min {
                return Termination::TargetReached;
            }

            let n = self.data.n_levels();
            let costs = self.unit_costs(n + 1);
            let (plan, quote) = match self.plan_for(eps, &errors, &costs) {
                Ok(p) => p,
                Err(t) => return t,
            };
            let remaining = self.ledger.remaining();
            let mut decision =
                budget_decision(quote, remaining, cheapest, eps, eps_prev, self.config.eta);
            if decision == BudgetDecision::Proceed && !self.ledger.affords(quote) {
                // Rounding between `remaining` and the running total.
                decision = BudgetDecision::Relax(0.5 * (eps + eps_prev));
            }
            let direction = match decision {
                BudgetDecision::Stop => return Termination::BudgetExhausted,
                BudgetDecision::Tighten(next) => {
                    eps = next;
                    tightenings += 1;
                    consecutive_relax = 0;
                    false
                }
                BudgetDecision::Relax(next) => {
                    let loosest = if eps < eps_prev {
                        match self.plan_for(eps_prev, &errors, &costs) {
                            Ok((_, q)) => q,
                            Err(t) => return t,
                        }
                    } else {
                        quote
                    };
                    if !self.ledger.affords(loosest)
                        || consecutive_relax + 1 >= MAX_CONSECUTIVE_RELAXATIONS
                    {
                        // No tolerance up to the last executed one fits: spend
                        // what is left on a scaled-down version of the plan.
                        match self.fill(&plan, eps, &costs, (relaxations, tightenings), observer) {
                            Ok(true) => {
                                eps_prev = eps;
                                (relaxations, tightenings, consecutive_relax, alternations) =
                                    (0, 0, 0, 0);
                                last_direction = None;
                                over_budget = None;
                                continue;
                            }
                            Ok(false) => return Termination::Stalled,
                            Err(t) => return t,
                        }
                    }
                    over_budget = Some((plan, eps));
                    eps = next;
                    relaxations += 1;
                    consecutive_relax += 1;
                    true
                }
                BudgetDecision::Proceed => {
                    if let Err(t) = self.execute(
                        &plan.delta_m,
                        Some(eps),
                        plan.predicted_cost,
                        (relaxations, tightenings),
                        observer,
                    ) {
                        return t;
                    }
                    eps_prev = eps;
                    relaxations = 0;
                    tightenings = 0;
                    consecutive_relax = 0;
                    alternations = 0;
                    last_direction = None;
                    over_budget = None;
                    continue;
                }
            };
            if last_direction.is_some_and(|d| d != direction) {
                alternations += 1;
                if alternations >= self.config.max_alternations {
                    // Settle the ping-pong with the tightest plan that was
                    // rejected for its cost.
                    let Some((plan, target)) = over_budget.take() else {
                        return Termination::OscillationGuard;
                    };
                    match self.fill(&plan, target, &costs, (relaxations, tightenings), observer) {
                        Ok(true) => {
                            eps = target;
                            eps_prev = target;
                            (relaxations, tightenings, consecutive_relax, alternations) =
                                (0, 0, 0, 0);
                            last_direction = None;
                            over_budget = None;
                            continue;
                        }
                        Ok(false) => return Termination::OscillationGuard,
                        Err(t) => return t,
                    }
                }
            }
            last_direction = Some(direction);
        }
    }
}

/// Runs the budgeted estimator to completion.
///
/// Configuration errors are returned as `Err`; failures during sampling end
/// the run with a partial report whose termination names the failing sample.
pub fn run(
    config: &BmlmcConfig,
    model: &dyn SampleProblem,
    scheduler: &Scheduler,
    mut observer: impl FnMut(&RoundRecord),
) -> Result<RunReport> {
    config.validate()?;
    let mut c = Controller {
        config,
        model,
        scheduler,
        fit: RateFitConfig::for_dimension(model.descriptor().dimension),
        data: MlmcDataset::new(),
        ledger: BudgetLedger::new(config.budget),
        rounds: Vec::new(),
        losses: LossSummary::default(),
        trace: Vec::new(),
        rates: None,
        errors: None,
        bias_bound: false,
        growth_unaffordable: false,
    };
    let termination = c.run(&mut observer);
    let levels = c
        .data
        .levels
        .iter()
        .map(|acc| LevelSummary {
            level: acc.level,
            count: acc.count,
            mean_y: acc.mean_y,
            variance_y: acc.sample_variance().ok(),
            mean_cost: acc.mean_cost,
            total_cost: acc.total_cost,
        })
        .collect();
    Ok(RunReport {
        termination,
        estimate: c.data.estimate(),
        errors: c.errors,
        rates: c.rates,
        levels,
        rounds: c.rounds,
        budget: c.ledger,
        losses: c.losses,
        bias_bound: c.bias_bound,
        growth_unaffordable: c.growth_unaffordable,
        data: c.data,
        trace: c.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{SyntheticModel, SyntheticSpec};
    use crate::scheduler::SchedulerConfig;
    use crate::stats::LevelAccumulator;

    fn two_level_data() -> MlmcDataset {
        let accs = vec![
            LevelAccumulator::from_moments(0, 100, 1.0, 0.0, 1.0, 99.0, 1.0),
            LevelAccumulator::from_moments(1, 100, 0.1, 0.0, 0.1, 9.9, 8.0),
        ];
        MlmcDataset::from_levels(accs).unwrap()
    }

    #[test]
    fn plan_without_work() {
        let data = two_level_data();
        let (theta, eps) = (0.5, 1.0);
        let errors =
            ErrorEstimate::from_parts(0.8 * (1.0f64 - theta).sqrt() * eps, 0.8 * theta * eps * eps);
        let plan = plan_round(&data, &errors, eps, theta, true, 10, 8, &[1.0, 8.0, 64.0]).unwrap();
        assert!(!plan.grow_level);
        assert!(plan.is_empty());
        assert_eq!(plan.predicted_cost, 0.0);
        assert!(matches!(
            budget_decision(plan.predicted_cost, 100.0, 1.0, eps, 1.2, 0.9),
            BudgetDecision::Tighten(e) if (e - 0.9).abs() < 1e-15
        ));
    }

    #[test]
    fn bias_above_threshold_grows() {
        let data = two_level_data();
        let (theta, eps) = (0.5, 1.0);
        let threshold = (1.0f64 - theta).sqrt() * eps;
        let errors = ErrorEstimate::from_parts(threshold * (1.0 + 1e-9), 0.0);
        let plan = plan_round(&data, &errors, eps, theta, true, 10, 8, &[1.0, 8.0, 64.0]).unwrap();
        assert!(plan.grow_level);
        assert_eq!(plan.delta_m, vec![0, 0, 8]);
        assert_eq!(plan.predicted_cost, 8.0 * 64.0);

        let capped = plan_round(&data, &errors, eps, theta, true, 1, 8, &[1.0, 8.0, 64.0]).unwrap();
        assert!(!capped.grow_level && capped.bias_bound);
    }

    #[test]
    fn variance_branch_uses_missing_samples() {
        let data = two_level_data();
        let errors = ErrorEstimate::from_parts(0.0, 0.02);
        let eps = 0.1;
        let plan = plan_round(&data, &errors, eps, 0.5, true, 10, 8, &[1.0, 8.0, 64.0]).unwrap();
        let alloc = optimal_samples(&data, eps, 0.5).unwrap();
        for l in 0..2 {
            assert_eq!(plan.delta_m[l], alloc.m_opt[l].saturating_sub(100));
        }
    }

    #[test]
    fn decisions() {
        assert!(matches!(
            budget_decision(20.0, 10.0, 1.0, 0.5, 0.7, 0.9),
            BudgetDecision::Relax(e) if (e - 0.6).abs() < 1e-15
        ));
        assert_eq!(
            budget_decision(5.0, 0.4, 1.0, 0.5, 0.7, 0.9),
            BudgetDecision::Stop
        );
        assert_eq!(
            budget_decision(5.0, 10.0, 1.0, 0.5, 0.7, 0.9),
            BudgetDecision::Proceed
        );
    }

    fn scheduler() -> Scheduler {
        Scheduler::new(SchedulerConfig::default()).unwrap()
    }

    fn config(budget: f64) -> BmlmcConfig {
        BmlmcConfig {
            budget,
            init_samples: vec![256, 64, 16],
            master_seed: 11,
            ..BmlmcConfig::default()
        }
    }

    #[test]
    fn infeasible_init() {
        let model = SyntheticModel::new(SyntheticSpec::default()).unwrap();
        let report = run(&config(100.0), &model, &scheduler(), |_| {}).unwrap();
        assert!(matches!(
            report.termination,
            Termination::InfeasibleInit { .. }
        ));
        assert!(report.rounds.is_empty());
        assert_eq!(report.consumed(), 0.0);
    }

    #[test]
    fn run_respects_budget_and_accumulates() {
        let model = SyntheticModel::new(SyntheticSpec::default()).unwrap();
        let budget = 5e6;
        let mut seen = 0;
        let report = run(&config(budget), &model, &scheduler(), |_| seen += 1).unwrap();
        assert_eq!(seen, report.rounds.len());
        assert!(report.consumed() <= budget);
        assert!(report.consumed() >= 0.9 * budget, "{}", report.consumed());
        for w in report.rounds.windows(2) {
            assert!(w[1].epsilon <= w[0].epsilon);
            for (a, b) in w[0].counts.iter().zip(&w[1].counts) {
                assert!(b >= a);
            }
        }
        let cheapest = model.modeled_cost(0).unwrap();
        assert!(
            report.budget.remaining() < cheapest
                || report.termination != Termination::BudgetExhausted
        );
    }

    #[test]
    fn target_tolerance_stops_early() {
        let model = SyntheticModel::new(SyntheticSpec::default()).unwrap();
        let cfg = BmlmcConfig {
            epsilon_min: 0.05,
            ..config(1e9)
        };
        let report = run(&cfg, &model, &scheduler(), |_| {}).unwrap();
        assert_eq!(report.termination, Termination::TargetReached);
        assert!(report.final_rmse().unwrap() <= 0.05);
    }

    #[test]
    fn invalid_config() {
        let model = SyntheticModel::new(SyntheticSpec::default()).unwrap();
        let cfg = BmlmcConfig {
            theta: 1.5,
            ..config(1e6)
        };
        assert!(run(&cfg, &model, &scheduler(), |_| {}).is_err());
        let cfg = BmlmcConfig {
            init_samples: vec![16, 1],
            ..config(1e6)
        };
        assert!(run(&cfg, &model, &scheduler(), |_| {}).is_err());
    }
}
