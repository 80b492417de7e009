//! End-to-end acceptance checks.
//!
//! Prints one `PASS`/`FAIL` line per criterion. The process exits with a
//! failure status only when `BMLMC_ACCEPTANCE_STRICT` is set, so that a
//! criterion the method does not meet is reported rather than hidden.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use bmlmc::controller::{run, BmlmcConfig, RunReport};
use bmlmc::estimator::optimal_samples;
use bmlmc::models::field::{CovSpec, FieldSampler};
use bmlmc::models::wave1d::{Wave1d, Wave1dSpec, WaveSolver};
use bmlmc::models::{SampleProblem, SyntheticModel, SyntheticSpec};
use bmlmc::scheduler::{build_plan, split_exponent, Scheduler, SchedulerConfig};
use bmlmc::stats::{tree_reduce, LevelAccumulator, MlmcDataset};
use bmlmc_cli::experiment::{self, ScalingSetup};
use bmlmc_cli::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MEAN_REL_TOL: f64 = 1e-12;
const MOMENT_REL_TOL: f64 = 1e-10;
const ALLOCATION_REL_TOL: f64 = 5e-3;
const SLOPE_TOL_ABOVE: f64 = 0.1;
const SLOPE_TOL_BELOW: f64 = 0.05;
const MIN_BUDGET_USE: f64 = 0.9;
const RATE_REL_TOL: f64 = 0.1;
const SCALING_DELTA_TOL: f64 = 0.15;
const SCALING_NOISE_FACTOR: f64 = 2.0;
const MIN_WAVE_ORDER: f64 = 1.5;
const MAX_ENERGY_GROWTH: f64 = 1e-10;
const COVARIANCE_SE: f64 = 3.0;

/// Initial sequence for the slope studies; small enough that three decades
/// of budget stay above ten times its cost.
const SLOPE_INIT: [u64; 3] = [512, 128, 32];
const SLOPE_REPS: u64 = 5;
/// Budgets `10 * init * 10^{j/2}`, `j = 0..=6`.
const SLOPE_STEPS: i32 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn welford_merge() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_mean, mut worst_s2) = (0.0f64, 0.0f64);
    for instance in 0..200 {
        let n = if instance == 0 {
            100_000
        } else {
            rng.random_range(2..=100_000)
        };
        let values: Vec<f64> = (0..n)
            .map(|_| rng.random_range(1.0..10.0) * 10f64.powi(rng.random_range(-3..=5)))
            .collect();
        let mean = neumaier(values.iter().copied()) / n as f64;
        let s2 = neumaier(values.iter().map(|v| (v - mean) * (v - mean)));

        let mut cuts: Vec<usize> = (0..rng.random_range(0..64))
            .map(|_| rng.random_range(0..=n))
            .collect();
        cuts.extend([0, n]);
        cuts.sort_unstable();
        let parts: Vec<LevelAccumulator> = cuts
            .windows(2)
            .map(|w| {
                let mut acc = LevelAccumulator::new(0);
                for &v in &values[w[0]..w[1]] {
                    acc.accumulate(v, 0.0, 1.0).unwrap();
                }
                acc
            })
            .collect();
        let mut sequential = LevelAccumulator::new(0);
        for p in &parts {
            sequential.merge_from(p).unwrap();
        }
        let tree = tree_reduce(&parts, 0).unwrap();
        for acc in [&sequential, &tree] {
            if acc.count != n as u64 {
                return outcome(
                    false,
                    format!("instance {instance}: count {} of {n}", acc.count),
                );
            }
            worst_mean = worst_mean
                .max(rel(acc.mean_q, mean))
                .max(rel(acc.mean_y, mean));
            worst_s2 = worst_s2.max(rel(acc.s2_q, s2)).max(rel(acc.s2_y, s2));
        }
    }
    outcome(
        worst_mean <= MEAN_REL_TOL && worst_s2 <= MOMENT_REL_TOL,
        format!(
            "200 partitioned datasets: worst relative error mean {worst_mean:.2e} (tol {MEAN_REL_TOL:.0e}), second moment {worst_s2:.2e} (tol {MOMENT_REL_TOL:.0e})"
        ),
    )
}

/// Minimal `sum M_l C_l` subject to `sum V_l / M_l = target`, found by a
/// nested golden-section search over the variance share of each level.
fn constrained_min_cost(v: &[f64], c: &[f64], target: f64) -> f64 {
    fn golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut x = b - g * (b - a);
        let mut y = a + g * (b - a);
        let (mut fx, mut fy) = (f(x), f(y));
        for _ in 0..90 {
            if fx < fy {
                b = y;
                y = x;
                fy = fx;
                x = b - g * (b - a);
                fx = f(x);
            } else {
                a = x;
                x = y;
                fx = fy;
                y = a + g * (b - a);
                fy = f(y);
            }
        }
        f(0.5 * (a + b))
    }
    fn rec(v: &[f64], c: &[f64], share: f64, target: f64) -> f64 {
        let level = |i: usize, t: f64| c[i] * v[i] / (t * target);
        if v.len() == 1 {
            return level(0, share);
        }
        golden(
            |t| level(0, t) + rec(&v[1..], &c[1..], share - t, target),
            share * 1e-12,
            share * (1.0 - 1e-12),
        )
    }
    rec(v, c, 1.0, target)
}

fn allocation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi));
    let (mut worst, mut violations) = (0.0f64, 0);
    for _ in 0..100 {
        let levels = rng.random_range(1..=4);
        let v: Vec<f64> = (0..levels)
            .map(|_| log_uniform(&mut rng, -3.0, 3.0))
            .collect();
        let c: Vec<f64> = (0..levels)
            .map(|_| log_uniform(&mut rng, -3.0, 3.0))
            .collect();
        let eps = log_uniform(&mut rng, -3.0, 0.0);
        let theta = rng.random_range(0.2..0.8);
        let data = MlmcDataset::from_levels(
            (0..levels)
                .map(|l| LevelAccumulator::from_moments(l, 2, 0.0, 0.0, 0.0, v[l], c[l]))
                .collect(),
        )
        .unwrap();
        let alloc = optimal_samples(&data, eps, theta).unwrap();
        let target = theta * eps * eps;
        let cost: f64 = alloc.continuous.iter().zip(&c).map(|(m, c)| m * c).sum();
        worst = worst.max(rel(cost, constrained_min_cost(&v, &c, target)));
        let achieved: f64 = v.iter().zip(&alloc.m_opt).map(|(v, &m)| v / m as f64).sum();
        if achieved > target * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    outcome(
        worst <= ALLOCATION_REL_TOL && violations == 0,
        format!(
            "100 instances: worst cost gap to the constrained minimizer {:.3}% (tol {:.1}%), variance target missed after ceiling {violations} times",
            100.0 * worst,
            100.0 * ALLOCATION_REL_TOL
        ),
    )
}

fn scheduler_rule() -> Outcome {
    let mut failures = Vec::new();
    for p in (0..=10).map(|e| 1u64 << e) {
        for m in 1..=4096u64 {
            let k = split_exponent(p, m);
            let rule = if m <= p {
                (1u64 << k) * m <= p && p < (1u64 << (k + 1)) * m
            } else {
                k == 0
            };
            let plan = build_plan(p, &[m]);
            let mut next = 0;
            let mut disjoint = true;
            for wave in plan.levels[0].waves(p) {
                let mut end = 0;
                for g in wave.sample_groups(0) {
                    disjoint &= g.units.start == end && g.sample == next;
                    end = g.units.end;
                    next += 1;
                }
                disjoint &= end <= p;
            }
            if !rule || !disjoint || next != m {
                failures.push(format!("p {p} m {m}"));
            }
        }
    }
    let triples = [(4, 1, 2), (4, 2, 1), (4, 4, 0)]
        .iter()
        .all(|&(p, m, k)| split_exponent(p, m) == k);
    let shape: Vec<Vec<(usize, u64, u32)>> = build_plan(4, &[16, 2, 1])
        .levels
        .iter()
        .map(|ls| ls.waves(4).map(|w| (w.level, w.groups, w.k)).collect())
        .collect();
    let expected = vec![
        vec![(2, 1, 2)],
        vec![(1, 2, 1)],
        vec![(0, 4, 0), (0, 4, 0), (0, 4, 0), (0, 4, 0)],
    ];
    outcome(
        failures.is_empty() && triples && shape == expected,
        format!(
            "11 x 4096 (p, M) pairs, {} violations; example triples {}; wave structure for [16, 2, 1] on 4 units {}",
            failures.len(),
            if triples { "match" } else { "differ" },
            if shape == expected { "matches" } else { "differs" }
        ),
    )
}

struct SlopeStudy {
    slope: f64,
    runs: Vec<(f64, RunReport)>,
    init_cost: f64,
}

fn slope_study(spec: SyntheticSpec) -> SlopeStudy {
    let model = SyntheticModel::new(spec).unwrap();
    let scheduler = Scheduler::new(SchedulerConfig::default()).unwrap();
    let init_cost: f64 = SLOPE_INIT
        .iter()
        .enumerate()
        .map(|(l, &m)| m as f64 * model.modeled_cost(l).unwrap())
        .sum();
    let mut runs = Vec::new();
    for j in 0..SLOPE_STEPS {
        let budget = 10.0 * init_cost * 10f64.powf(j as f64 / 2.0);
        for seed in 0..SLOPE_REPS {
            let cfg = BmlmcConfig {
                budget,
                init_samples: SLOPE_INIT.to_vec(),
                master_seed: seed,
                ..BmlmcConfig::default()
            };
            runs.push((budget, run(&cfg, &model, &scheduler, |_| {}).unwrap()));
        }
    }
    let pts: Vec<(f64, f64)> = runs
        .iter()
        .map(|(b, r)| (b.ln(), r.final_rmse().unwrap().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    SlopeStudy {
        slope,
        runs,
        init_cost,
    }
}

fn slope_above(study: &SlopeStudy) -> Outcome {
    outcome(
        (study.slope + 0.5).abs() <= SLOPE_TOL_ABOVE,
        format!(
            "rates (2, 4, 3), 7 budgets over 3 decades x {SLOPE_REPS} seeds: slope {:.4}, target -0.5 +- {SLOPE_TOL_ABOVE}",
            study.slope
        ),
    )
}

fn slope_below(study: &SlopeStudy) -> Outcome {
    let stated = -0.2857;
    let formula = -1.0 / (2.0 * 1.0 + 3.0 - 0.5);
    outcome(
        (study.slope - stated).abs() <= SLOPE_TOL_BELOW,
        format!(
            "rates (1, 0.5, 3), 7 budgets over 3 decades x {SLOPE_REPS} seeds: slope {:.4}, target {stated} +- {SLOPE_TOL_BELOW} (-alpha/(2 alpha + gamma - beta) = {formula:.4}, off by {:.4})",
            study.slope,
            (study.slope - formula).abs()
        ),
    )
}

fn budget_feasibility(studies: &[&SlopeStudy]) -> Outcome {
    let (mut runs, mut over, mut under) = (0, 0, 0);
    let mut lowest = f64::INFINITY;
    for s in studies {
        for (budget, r) in &s.runs {
            runs += 1;
            if r.consumed() > *budget {
                over += 1;
            }
            if *budget >= 10.0 * s.init_cost {
                let used = r.consumed() / budget;
                lowest = lowest.min(used);
                if used < MIN_BUDGET_USE {
                    under += 1;
                }
            }
        }
    }
    outcome(
        over == 0 && under == 0,
        format!(
            "{runs} runs: {over} exceed the budget, {under} use less than {MIN_BUDGET_USE} of it; lowest use {lowest:.4}"
        ),
    )
}

fn rate_recovery() -> Outcome {
    let model = SyntheticModel::new(SyntheticSpec::with_rates(2.0, 4.0, 3.0)).unwrap();
    let scheduler = Scheduler::new(SchedulerConfig::default()).unwrap();
    let mut worst = [0.0f64; 3];
    let mut fitted = Vec::new();
    for seed in 0..5 {
        let cfg = BmlmcConfig {
            budget: 1e8,
            master_seed: seed,
            ..BmlmcConfig::default()
        };
        let r = run(&cfg, &model, &scheduler, |_| {}).unwrap();
        let Some(rates) = r.rates else {
            return outcome(false, format!("seed {seed}: no rates fitted"));
        };
        let got = [rates.alpha_hat, rates.beta_hat, rates.gamma_hat];
        for (w, (g, t)) in worst.iter_mut().zip(got.iter().zip([2.0, 4.0, 3.0])) {
            *w = w.max(rel(*g, t));
        }
        fitted.push(format!("({:.2}, {:.2}, {:.2})", got[0], got[1], got[2]));
    }
    outcome(
        worst.iter().all(|&w| w <= RATE_REL_TOL),
        format!(
            "default initial sequence, budget 1e8, 5 seeds: fitted {}; worst relative errors {:.3} / {:.3} / {:.3} (tol {RATE_REL_TOL})",
            fitted.join(" "),
            worst[0],
            worst[1],
            worst[2]
        ),
    )
}

fn weak_scaling(dir: &Path) -> Outcome {
    let cfg = RunConfig::parse(
        "[model]\nkind = \"synthetic\"\n[method]\nbudget = 1\n[scheduler]\np_size = 512\nsigma_eff = 0.9\n",
        &[],
    )
    .unwrap();
    let setup = ScalingSetup {
        ks: (0..=5).collect(),
        time_budget: 1e6,
        repetitions: 4,
    };
    let report = experiment::weak_scaling(&cfg, &setup, dir).unwrap();
    // Points are ordered by k, so from the largest cluster to the smallest.
    let mut monotone = true;
    for w in report.points.windows(2) {
        let noise = w[0]
            .std_rmse
            .unwrap_or(0.0)
            .max(w[1].std_rmse.unwrap_or(0.0));
        monotone &= w[0].mean_rmse <= w[1].mean_rmse + SCALING_NOISE_FACTOR * noise;
    }
    let table: Vec<String> = report
        .points
        .iter()
        .map(|p| format!("p={} {:.4e}", p.p_size, p.mean_rmse))
        .collect();
    let (fit_ok, fit) = match report.fit {
        Some(f) => (
            f.delta.is_some_and(|d| (d - 0.5).abs() <= SCALING_DELTA_TOL) && f.err_s > 0.0,
            format!(
                "delta {} (target 0.5 +- {SCALING_DELTA_TOL}), err_s {:.3e} (must be > 0), err_p {:.3e}",
                f.delta.map_or("none".into(), |d| format!("{d:.4}")),
                f.err_s,
                f.err_p
            ),
        ),
        None => (false, format!("no fit: {}", report.fit_refused.unwrap_or_default())),
    };
    outcome(
        monotone && fit_ok && !report.partial && report.points.len() == 6,
        format!(
            "budget 1e6 per unit, 4 seeds: [{}]; non-increasing within {SCALING_NOISE_FACTOR}x noise: {monotone}; {fit}",
            table.join(", ")
        ),
    )
}

fn manufactured_error(n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let steps = (1.0 / (0.125 * h)).round() as usize;
    let solver = WaveSolver::new(&vec![1.0; n], 1.0, 1, 1.0 / steps as f64, steps).unwrap();
    let mut u = solver.project(|_| 0.0, |x| -2.0 / PI * (PI * x).cos());
    let load = solver.load(|x| (PI * x).cos() * (4.0 / PI - PI));
    solver
        .run(&mut u, |t| (2.0 * t).sin(), &load, |_, _| {})
        .unwrap();
    solver.l2_error(
        &u,
        |x| (PI * x).sin() * 2f64.sin(),
        |x| -(PI * x).cos() * 2.0 * 2f64.cos() / PI,
    )
}

fn wave_convergence() -> Outcome {
    let errors: Vec<f64> = (5..9).map(|j| manufactured_error(1 << j)).collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();

    let spec = Wave1dSpec {
        source_cutoff: Some(0.3),
        ..Wave1dSpec::default()
    };
    let model = Wave1d::new(spec.clone()).unwrap();
    let (rho, _) = model.densities(1, 4).unwrap();
    let solver = model.solver(1, &rho).unwrap();
    let load = solver.load(|x| model.source_profile(x));
    let mut u = vec![0.0; solver.dofs()];
    let tau = solver.time_step();
    let mut prev = f64::INFINITY;
    let mut growth = f64::NEG_INFINITY;
    solver
        .run(
            &mut u,
            |t| spec.ricker(t),
            &load,
            |step, state| {
                let e = solver.energy(state);
                // A step is source-free once its midpoint lies past the cutoff.
                if (step as f64 - 0.5) * tau > 0.3 && prev.is_finite() {
                    growth = growth.max((e - prev) / prev);
                }
                prev = e;
            },
        )
        .unwrap();
    let orders_ok = orders.iter().all(|&o| o >= MIN_WAVE_ORDER);
    outcome(
        orders_ok && growth <= MAX_ENERGY_GROWTH,
        format!(
            "L2 orders over 32..256 cells {:?} (min {MIN_WAVE_ORDER}); largest relative energy change per step after the source stops {growth:.2e} (max {MAX_ENERGY_GROWTH:.0e})",
            orders.iter().map(|o| (o * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn field_covariance() -> Outcome {
    let cov = CovSpec::default();
    let n = 256;
    let h = 1.0 / n as f64;
    let sampler = FieldSampler::new(&cov, n, h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let samples = 10_000;
    let lags: Vec<usize> = [0.0, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|f| (f * cov.correlation_length / h).round() as usize)
        .collect();
    let origin = 40;
    let mut sums = vec![0.0; lags.len()];
    for _ in 0..samples {
        let g = sampler.sample_gaussian(&mut rng);
        for (s, &lag) in sums.iter_mut().zip(&lags) {
            *s += g[origin] * g[origin + lag];
        }
    }
    let mut worst = 0.0f64;
    for (s, &lag) in sums.iter().zip(&lags) {
        let exact = cov.covariance(lag as f64 * h);
        let se = ((cov.sigma.powi(4) + exact * exact) / samples as f64).sqrt();
        worst = worst.max((s / samples as f64 - exact).abs() / se);
    }
    outcome(
        worst <= COVARIANCE_SE,
        format!("10^4 fields on 256 cells, lags {lags:?} cells: worst deviation {worst:.2} standard errors (max {COVARIANCE_SE})"),
    )
}

fn wave_run(dir: &Path) -> Outcome {
    let cfg = RunConfig::parse(
        "[model]\nkind = \"wave1d\"\n[method]\nbudget = 30\ninit_samples = [256, 64]\nmaster_seed = 11\n",
        &[],
    )
    .unwrap();
    let sweep = experiment::sweep(
        &cfg,
        "model.density.sigma",
        &["1.0".into(), "0.5".into()],
        dir,
    )
    .unwrap();
    let feasible = sweep.rows.iter().all(|r| {
        r.termination != "infeasible_init"
            && r.termination != "diverged"
            && r.termination != "error"
            && r.consumed.is_some_and(|c| c <= r.budget)
    });
    let grew = sweep
        .rows
        .iter()
        .all(|r| r.top_level.is_some_and(|l| l >= 2));
    let (wide, narrow) = (sweep.rows[0].err_rmse, sweep.rows[1].err_rmse);
    let ordered = matches!((wide, narrow), (Some(w), Some(n)) if w > n);
    let rows: Vec<String> = sweep
        .rows
        .iter()
        .map(|r| {
            format!(
                "sigma {}: {} rmse {:.3e} top level {} used {:.3}",
                r.value,
                r.termination,
                r.err_rmse.unwrap_or(f64::NAN),
                r.top_level.map_or("-".into(), |l| l.to_string()),
                r.consumed.unwrap_or(0.0) / r.budget
            )
        })
        .collect();
    outcome(
        feasible && grew && ordered && !sweep.partial,
        format!(
            "budget 30 from two initial levels: {}; grew beyond the initial levels {grew}; sigma 1.0 error larger {ordered}",
            rows.join("; ")
        ),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let configs = [
        (
            "synthetic",
            "[model]\nkind = \"synthetic\"\n[method]\nbudget = 1e8\ninit_samples = [512, 128, 32]\nmaster_seed = 12\n[scheduler]\np_size = 16\ntrace = true\n",
        ),
        (
            "wave1d",
            "[model]\nkind = \"wave1d\"\n[method]\nbudget = 2\ninit_samples = [64, 16]\nmaster_seed = 12\n[scheduler]\np_size = 8\n",
        ),
    ];
    let mut details = Vec::new();
    let mut pass = true;
    for (name, text) in configs {
        let files: Vec<Vec<u8>> = [1, 4, 8]
            .iter()
            .map(|w| {
                let cfg = RunConfig::parse(text, &[format!("scheduler.workers={w}")]).unwrap();
                let out = dir.join(format!("{name}_w{w}"));
                experiment::run_experiment(&cfg, &out).unwrap();
                std::fs::read(out.join("report.json")).unwrap()
            })
            .collect();
        let same = files[1..].iter().all(|f| *f == files[0]);
        pass &= same;
        details.push(format!(
            "{name} {}",
            if same { "identical" } else { "differ" }
        ));
    }
    outcome(
        pass,
        format!("report.json for 1, 4 and 8 workers: {}", details.join(", ")),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let mut failed = 0;
    let mut report = |index: u32, name: &str, start: Instant, o: Outcome| {
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} [{index:02}] {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };

    let t = Instant::now();
    report(1, "merged statistics match two-pass", t, welford_merge());
    let t = Instant::now();
    report(
        2,
        "allocation matches constrained minimizer",
        t,
        allocation_oracle(),
    );
    let t = Instant::now();
    report(3, "processor group rule", t, scheduler_rule());

    let t = Instant::now();
    let above = slope_study(SyntheticSpec::with_rates(2.0, 4.0, 3.0));
    report(
        4,
        "error-budget slope, beta > gamma",
        t,
        slope_above(&above),
    );
    let t = Instant::now();
    let below = slope_study(SyntheticSpec::with_rates(1.0, 0.5, 3.0));
    report(
        5,
        "error-budget slope, beta < gamma",
        t,
        slope_below(&below),
    );
    let t = Instant::now();
    report(
        6,
        "budget feasibility",
        t,
        budget_feasibility(&[&above, &below]),
    );
    drop((above, below));

    let t = Instant::now();
    report(7, "rate recovery", t, rate_recovery());
    let t = Instant::now();
    report(
        8,
        "weak scaling",
        t,
        weak_scaling(&tmp.path().join("scaling")),
    );
    let t = Instant::now();
    report(
        9,
        "wave solver convergence and energy",
        t,
        wave_convergence(),
    );
    let t = Instant::now();
    report(10, "field covariance", t, field_covariance());
    let t = Instant::now();
    report(
        11,
        "stochastic wave run",
        t,
        wave_run(&tmp.path().join("wave")),
    );
    let t = Instant::now();
    report(
        12,
        "determinism across workers",
        t,
        determinism(&tmp.path().join("determinism")),
    );

    println!("{} of 12 criteria passed", 12 - failed);
    if failed > 0 && std::env::var_os("BMLMC_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
