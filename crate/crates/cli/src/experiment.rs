//! Single runs, parameter sweeps and weak-scaling studies.

use std::collections::BTreeMap;
use std::path::Path;

use bmlmc::controller::{run, RunReport, Termination};
use bmlmc::models::{ModelSpec, Wave1d};
use bmlmc::scheduler::{fit_weak_scaling, ExecutionMode, ScalingFit, Scheduler};
use bmlmc::seed::sample_seed;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::report::{
    read_csv, write_json, write_trace, CsvLog, ReportFile, RoundRow, ROUNDS_HEADER, SCALING_HEADER,
    SCHEMA_VERSION, SWEEP_HEADER,
};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// Short name of a termination, as used in tables.
pub fn termination_reason(t: &Termination) -> &'static str {
    match t {
        Termination::BudgetExhausted => "budget_exhausted",
        Termination::TargetReached => "target_reached",
        Termination::OscillationGuard => "oscillation_guard",
        Termination::Stalled => "stalled",
        Termination::InfeasibleInit { .. } => "infeasible_init",
        Termination::Diverged { .. } => "diverged",
    }
}

/// Runs the estimator once and writes `rounds.csv`, `report.json` and, if
/// tracing is on, `trace.csv` into `dir`.
pub fn run_experiment(config: &RunConfig, dir: &Path) -> Result<RunReport> {
    create_dir(dir)?;
    let model = config.model.build()?;
    let scheduler = Scheduler::new(config.scheduler.clone())?;

    let mut rounds = match config.output.rounds_csv {
        true => Some(CsvLog::create(&dir.join("rounds.csv"), ROUNDS_HEADER)?),
        false => None,
    };
    let mut write_error = None;
    let report = run(&config.method, model.as_ref(), &scheduler, |record| {
        if let (Some(log), None) = (rounds.as_mut(), write_error.as_ref()) {
            write_error = log.append(&RoundRow::from(record)).err();
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }

    if config.output.report_json {
        let file = ReportFile {
            schema_version: SCHEMA_VERSION,
            config: config.echo()?,
            seed: config.method.master_seed,
            report: &report,
        };
        write_json(&dir.join("report.json"), &file)?;
    }
    if config.scheduler.trace {
        write_trace(&dir.join("trace.csv"), &report.trace)?;
    }
    log::info!(
        "{}: {} rounds, rmse {:?}, consumed {:.6e} of {:.6e}",
        termination_reason(&report.termination),
        report.rounds.len(),
        report.final_rmse(),
        report.consumed(),
        config.method.budget
    );
    Ok(report)
}

/// One member of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub termination: String,
    pub estimate: Option<f64>,
    pub err_rmse: Option<f64>,
    pub err_disc: Option<f64>,
    pub err_input: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub top_level: Option<usize>,
    pub consumed: Option<f64>,
    pub budget: f64,
}

impl SweepRow {
    fn from_report(value: &str, budget: f64, r: &RunReport) -> Self {
        Self {
            value: value.to_owned(),
            termination: termination_reason(&r.termination).to_owned(),
            estimate: r.errors.map(|_| r.estimate),
            err_rmse: r.errors.map(|e| e.err_rmse),
            err_disc: r.errors.map(|e| e.err_disc),
            err_input: r.errors.map(|e| e.err_input),
            alpha_hat: r.rates.map(|x| x.alpha_hat),
            beta_hat: r.rates.map(|x| x.beta_hat),
            gamma_hat: r.rates.map(|x| x.gamma_hat),
            top_level: r.data.top_level(),
            consumed: Some(r.consumed()),
            budget,
        }
    }

    fn failed(value: &str, budget: f64) -> Self {
        Self {
            value: value.to_owned(),
            termination: "error".into(),
            estimate: None,
            err_rmse: None,
            err_disc: None,
            err_input: None,
            alpha_hat: None,
            beta_hat: None,
            gamma_hat: None,
            top_level: None,
            consumed: None,
            budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub parameter: String,
    pub budget: f64,
    pub rows: Vec<SweepRow>,
    /// Some member failed or did not finish feasibly.
    pub partial: bool,
}

fn member_dir_name(parameter: &str, value: &str) -> String {
    let clean = |s: &str| {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "._-".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect::<String>()
    };
    format!("{}={}", clean(parameter), clean(value))
}

/// Runs `config` once per value of `parameter`, each with the same budget,
/// and writes the member outputs below `dir` plus `sweep.csv`/`sweep.json`.
pub fn sweep(
    config: &RunConfig,
    parameter: &str,
    values: &[String],
    dir: &Path,
) -> Result<SweepReport> {
    if parameter == "method.budget" {
        return Err(CliError::Usage(
            "sweep members share one budget; method.budget cannot be swept".into(),
        ));
    }
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    // Reject bad values before any run starts.
    let members = values
        .iter()
        .map(|v| config.with_override(&format!("{parameter}={v}")))
        .collect::<Result<Vec<_>>>()?;

    create_dir(dir)?;
    let budget = config.method.budget;
    let mut log = CsvLog::create(&dir.join("sweep.csv"), SWEEP_HEADER)?;
    let mut rows = Vec::with_capacity(values.len());
    let mut partial = false;
    for (value, member) in values.iter().zip(members) {
        debug_assert_eq!(member.method.budget, budget);
        let row = match run_experiment(&member, &dir.join(member_dir_name(parameter, value))) {
            Ok(report) => {
                partial |= !finished(&report.termination);
                SweepRow::from_report(value, budget, &report)
            }
            Err(e) => {
                log::error!("{parameter}={value}: {e}");
                partial = true;
                SweepRow::failed(value, budget)
            }
        };
        log.append(&row)?;
        rows.push(row);
    }
    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        parameter: parameter.to_owned(),
        budget,
        rows,
        partial,
    };
    write_json(&dir.join("sweep.json"), &report)?;
    Ok(report)
}

/// Whether a run completed with a usable estimate.
pub fn finished(t: &Termination) -> bool {
    !matches!(
        t,
        Termination::InfeasibleInit { .. } | Termination::Diverged { .. }
    )
}

/// Settings of a weak-scaling study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSetup {
    /// Processor-count halvings to run; cluster `k` has `p_size / 2^k` units.
    pub ks: Vec<u32>,
    /// Budget per unit; cluster `k` receives `p_k * time_budget`.
    pub time_budget: f64,
    pub repetitions: u32,
}

/// One run of a weak-scaling study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub k: u32,
    pub p_size: u64,
    pub repetition: u32,
    pub seed: u64,
    pub budget: f64,
    pub termination: String,
    pub err_rmse: Option<f64>,
    pub consumed: Option<f64>,
    pub top_level: Option<usize>,
    pub idle: Option<f64>,
    pub comm_loss: Option<f64>,
}

/// Mean final error over the repetitions of one cluster size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub k: u32,
    pub p_size: u64,
    pub runs: u32,
    pub mean_rmse: f64,
    /// Sample standard deviation across repetitions; absent for one run.
    pub std_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub schema_version: u32,
    pub p_max: u64,
    pub time_budget: f64,
    pub points: Vec<ScalingPoint>,
    pub fit: Option<ScalingFit>,
    /// Why no fit was produced.
    pub fit_refused: Option<String>,
    pub partial: bool,
}

/// Averages the final errors of `rows` per `k`, skipping failed runs.
pub fn scaling_points(rows: &[ScalingRow]) -> Vec<ScalingPoint> {
    let mut by_k: BTreeMap<u32, (u64, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let entry = by_k.entry(r.k).or_insert((r.p_size, Vec::new()));
        if let Some(e) = r.err_rmse {
            entry.1.push(e);
        }
    }
    by_k.into_iter()
        .filter(|(_, (_, errs))| !errs.is_empty())
        .map(|(k, (p_size, errs))| {
            let n = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / n;
            let std = (errs.len() > 1)
                .then(|| (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
            ScalingPoint {
                k,
                p_size,
                runs: errs.len() as u32,
                mean_rmse: mean,
                std_rmse: std,
            }
        })
        .collect()
}

/// Fits the weak-scaling model to the mean error per `k`.
pub fn fit_points(points: &[ScalingPoint]) -> std::result::Result<ScalingFit, String> {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.k as f64, p.mean_rmse)).collect();
    fit_weak_scaling(&xy).map_err(|e| e.to_string())
}

/// Runs the estimator on clusters of `p_size / 2^k` units for each `k`, every
/// cluster with the same budget per unit, and fits how the final error
/// depends on the cluster size. The configured `p_size` is the largest
/// cluster.
pub fn weak_scaling(config: &RunConfig, setup: &ScalingSetup, dir: &Path) -> Result<ScalingReport> {
    if config.scheduler.mode != ExecutionMode::Simulated {
        return Err(CliError::Usage(
            "weak scaling needs the simulated execution mode".into(),
        ));
    }
    if setup.repetitions == 0 || setup.ks.is_empty() {
        return Err(CliError::Usage(
            "weak scaling needs at least one k and one repetition".into(),
        ));
    }
    if !(setup.time_budget > 0.0) {
        return Err(CliError::Usage(
            "the budget per unit must be positive".into(),
        ));
    }
    let p_max = config.scheduler.p_size;
    if let Some(&k) = setup.ks.iter().find(|&&k| k > p_max.ilog2()) {
        return Err(CliError::Usage(format!(
            "k = {k} leaves fewer than one of {p_max} units"
        )));
    }

    create_dir(dir)?;
    let mut log = CsvLog::create(&dir.join("scaling.csv"), SCALING_HEADER)?;
    let mut rows = Vec::new();
    let mut partial = false;
    for &k in &setup.ks {
        let p = p_max >> k;
        for rep in 0..setup.repetitions {
            let mut member = config.clone();
            member.scheduler.p_size = p;
            member.method.budget = p as f64 * setup.time_budget;
            member.method.master_seed = config.method.master_seed.wrapping_add(rep as u64);
            let seed = member.method.master_seed;
            let budget = member.method.budget;
            let row = match run_experiment(&member, &dir.join(format!("k{k}_r{rep}"))) {
                Ok(r) => {
                    let ok = finished(&r.termination);
                    partial |= !ok;
                    ScalingRow {
                        k,
                        p_size: p,
                        repetition: rep,
                        seed,
                        budget,
                        termination: termination_reason(&r.termination).to_owned(),
                        err_rmse: if ok { r.final_rmse() } else { None },
                        consumed: Some(r.consumed()),
                        top_level: r.data.top_level(),
                        idle: Some(r.losses.idle),
                        comm_loss: Some(r.losses.comm_loss),
                    }
                }
                Err(e) => {
                    log::error!("k = {k}, repetition {rep}: {e}");
                    partial = true;
                    ScalingRow {
                        k,
                        p_size: p,
                        repetition: rep,
                        seed,
                        budget,
                        termination: "error".into(),
                        err_rmse: None,
                        consumed: None,
                        top_level: None,
                        idle: None,
                        comm_loss: None,
                    }
                }
            };
            log.append(&row)?;
            rows.push(row);
        }
    }

    let points = scaling_points(&rows);
    let (fit, fit_refused) = match fit_points(&points) {
        Ok(f) => (Some(f), None),
        Err(reason) => (None, Some(reason)),
    };
    let report = ScalingReport {
        schema_version: SCHEMA_VERSION,
        p_max,
        time_budget: setup.time_budget,
        points,
        fit,
        fit_refused,
        partial,
    };
    write_json(&dir.join("scaling.json"), &report)?;
    Ok(report)
}

/// Columns of a point table accepted by [`fit_scaling_file`].
#[derive(Debug, Deserialize)]
struct PointRow {
    k: u32,
    #[serde(default)]
    p_size: u64,
    err_rmse: Option<f64>,
}

/// Fits the weak-scaling model to a `scaling.csv`-style table with at least
/// the columns `k` and `err_rmse`.
pub fn fit_scaling_file(
    path: &Path,
) -> Result<(Vec<ScalingPoint>, std::result::Result<ScalingFit, String>)> {
    let rows: Vec<PointRow> = read_csv(path)?;
    let rows: Vec<ScalingRow> = rows
        .into_iter()
        .map(|r| ScalingRow {
            k: r.k,
            p_size: r.p_size,
            repetition: 0,
            seed: 0,
            budget: 0.0,
            termination: String::new(),
            err_rmse: r.err_rmse,
            consumed: None,
            top_level: None,
            idle: None,
            comm_loss: None,
        })
        .collect();
    let points = scaling_points(&rows);
    let fit = fit_points(&points);
    Ok((points, fit))
}

fn wave_model(config: &RunConfig) -> Result<Wave1d> {
    match &config.model {
        ModelSpec::Wave1d(spec) => Ok(Wave1d::new(spec.clone())?),
        _ => Err(CliError::Usage(
            "dumps are only available for the wave1d model".into(),
        )),
    }
}

#[derive(Debug, Serialize)]
struct FieldRow {
    grid: &'static str,
    x: f64,
    rho: f64,
}

/// Writes the densities of sample `sample` on `level` (fine grid and, above
/// level 0, the coupled coarse grid) to `field.csv`.
pub fn dump_field(config: &RunConfig, level: usize, sample: u64, dir: &Path) -> Result<u64> {
    let model = wave_model(config)?;
    let seed = sample_seed(config.method.master_seed, level, sample);
    let (fine, coarse) = model.densities(level, seed)?;
    create_dir(dir)?;
    let mut log = CsvLog::create(
        &dir.join("field.csv"),
        &format!("# bmlmc field v1 level={level} sample={sample} seed={seed}"),
    )?;
    for (grid, rho) in [("fine", &fine), ("coarse", &coarse)] {
        let h = 1.0 / rho.len().max(1) as f64;
        for (j, &r) in rho.iter().enumerate() {
            log.append(&FieldRow {
                grid,
                x: (j as f64 + 0.5) * h,
                rho: r,
            })?;
        }
    }
    Ok(seed)
}

#[derive(Debug, Serialize)]
struct SolutionRow {
    x: f64,
    v: f64,
    p: f64,
}

/// Points per cell at which the solution is written.
const SOLUTION_POINTS: usize = 4;

/// Solves sample `sample` on `level` and writes velocity and pressure at the
/// final time to `solution.csv`.
pub fn dump_solution(config: &RunConfig, level: usize, sample: u64, dir: &Path) -> Result<u64> {
    let model = wave_model(config)?;
    let seed = sample_seed(config.method.master_seed, level, sample);
    let (rho, _) = model.densities(level, seed)?;
    let (solver, u) = model.solve(level, &rho, seed, |_, _| {})?;
    create_dir(dir)?;
    let mut log = CsvLog::create(
        &dir.join("solution.csv"),
        &format!(
            "# bmlmc solution v1 level={level} sample={sample} seed={seed} t={}",
            model.spec().final_time
        ),
    )?;
    let n = solver.n_cells() * SOLUTION_POINTS;
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        let (v, p) = solver.evaluate(&u, x);
        log.append(&SolutionRow { x, v, p })?;
    }
    Ok(seed)
}
