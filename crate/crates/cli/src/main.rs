use std::path::PathBuf;
use std::process::ExitCode;

use bmlmc::controller::Termination;
use bmlmc_cli::experiment::{self, ScalingSetup};
use bmlmc_cli::{CliError, RunConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "bmlmc",
    version,
    about = "Budgeted multi-level Monte Carlo experiments"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides method.master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Configuration override `key.path=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, value_enum, global = true)]
    mode: Option<Mode>,
    /// Worker threads evaluating samples.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Simulated,
    Threaded,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the estimator once.
    Run,
    /// Run once per value of one configuration key, all at the same budget.
    Sweep {
        /// Configuration key, e.g. `model.density.sigma`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Run on clusters of p_size / 2^k units with a fixed budget per unit.
    WeakScaling {
        #[arg(long, default_value_t = 0)]
        k_min: u32,
        #[arg(long)]
        k_max: u32,
        /// Budget per unit; defaults to method.budget / scheduler.p_size.
        #[arg(long)]
        time_budget: Option<f64>,
        #[arg(long, default_value_t = 1)]
        repetitions: u32,
    },
    /// Write one density realization of the wave model to field.csv.
    DumpField(SampleArgs),
    /// Write the final-time wave solution of one sample to solution.csv.
    DumpSolution(SampleArgs),
    /// Fit the weak-scaling model to a table with columns k and err_rmse.
    FitScaling {
        /// Point table, e.g. a scaling.csv.
        input: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 0)]
    level: usize,
    /// Sample ordinal on the level.
    #[arg(long, default_value_t = 0)]
    sample: u64,
}

impl Global {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(seed) = self.seed {
            o.push(format!("method.master_seed={seed}"));
        }
        if let Some(out) = &self.out {
            o.push(format!(
                "output.dir={}",
                toml::Value::String(out.display().to_string())
            ));
        }
        if let Some(mode) = self.mode {
            let m = match mode {
                Mode::Simulated => "simulated",
                Mode::Threaded => "threaded",
            };
            o.push(format!("scheduler.mode=\"{m}\""));
        }
        if let Some(w) = self.workers {
            o.push(format!("scheduler.workers={w}"));
        }
        o
    }

    fn load(&self) -> Result<RunConfig, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("--config is required for this command".into()))?;
        RunConfig::load(path, &self.overrides())
    }
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("JSON values serialize")
    );
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    if let Command::FitScaling { input } = &cli.command {
        let (points, fit) = experiment::fit_scaling_file(input)?;
        print_json(&match fit {
            Ok(fit) => json!({ "points": points, "fit": fit }),
            Err(reason) => json!({ "points": points, "fit": null, "fit_refused": reason }),
        });
        return Ok(0);
    }

    let config = cli.global.load()?;
    let dir = config.output.dir.clone();
    match &cli.command {
        Command::Run => {
            let report = experiment::run_experiment(&config, &dir)?;
            print_json(&json!({
                "termination": report.termination,
                "rounds": report.rounds.len(),
                "estimate": report.estimate,
                "errors": report.errors,
                "consumed": report.consumed(),
                "budget": config.method.budget,
            }));
            Ok(match report.termination {
                Termination::InfeasibleInit { .. } => EXIT_INFEASIBLE,
                Termination::Diverged { .. } => EXIT_DIVERGED,
                _ => 0,
            })
        }
        Command::Sweep { param, values } => {
            let report = experiment::sweep(&config, param, values, &dir)?;
            print_json(&serde_json::to_value(&report)?);
            Ok(if report.partial { EXIT_PARTIAL } else { 0 })
        }
        Command::WeakScaling {
            k_min,
            k_max,
            time_budget,
            repetitions,
        } => {
            if k_min > k_max {
                return Err(CliError::Usage(format!("empty k range {k_min}..={k_max}")));
            }
            let setup = ScalingSetup {
                ks: (*k_min..=*k_max).collect(),
                time_budget: time_budget
                    .unwrap_or(config.method.budget / config.scheduler.p_size as f64),
                repetitions: *repetitions,
            };
            let report = experiment::weak_scaling(&config, &setup, &dir)?;
            print_json(&serde_json::to_value(&report)?);
            Ok(if report.partial { EXIT_PARTIAL } else { 0 })
        }
        Command::DumpField(a) => {
            let seed = experiment::dump_field(&config, a.level, a.sample, &dir)?;
            print_json(&json!({ "file": dir.join("field.csv"), "seed": seed }));
            Ok(0)
        }
        Command::DumpSolution(a) => {
            let seed = experiment::dump_solution(&config, a.level, a.sample, &dir)?;
            print_json(&json!({ "file": dir.join("solution.csv"), "seed": seed }));
            Ok(0)
        }
        Command::FitScaling { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
