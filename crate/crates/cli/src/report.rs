//! Files written by the experiments.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use bmlmc::controller::{RoundRecord, RunReport};
use bmlmc::scheduler::TraceRow;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const ROUNDS_HEADER: &str = "# bmlmc rounds v1";
pub const TRACE_HEADER: &str = "# bmlmc trace v1";
pub const SCALING_HEADER: &str = "# bmlmc scaling v1";
pub const SWEEP_HEADER: &str = "# bmlmc sweep v1";

/// Contents of `report.json`.
#[derive(Debug, Serialize)]
pub struct ReportFile<'a> {
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub seed: u64,
    #[serde(flatten)]
    pub report: &'a RunReport,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// A CSV file that starts with a version comment and is flushed after every
/// row, so an interrupted run leaves a readable prefix.
pub struct CsvLog {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvLog {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        let mut file = File::create(path).map_err(CliError::io(path))?;
        writeln!(file, "{header}").map_err(CliError::io(path))?;
        Ok(Self {
            path: path.to_owned(),
            writer: csv::Writer::from_writer(file),
        })
    }

    pub fn append(&mut self, row: &impl Serialize) -> Result<()> {
        self.writer
            .serialize(row)
            .map_err(CliError::csv(&self.path))?;
        self.writer.flush().map_err(CliError::io(&self.path))
    }
}

fn join(values: &[u64]) -> String {
    values
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

/// One line of `rounds.csv`; per-level vectors are `;`-separated.
#[derive(Debug, Serialize)]
pub struct RoundRow {
    pub round: u64,
    pub epsilon: f64,
    pub top_level: usize,
    pub counts: String,
    pub delta_m: String,
    pub grew: bool,
    pub err_disc: f64,
    pub err_input: f64,
    pub err_rmse: f64,
    pub estimate: f64,
    pub predicted_cost: f64,
    pub consumed: f64,
    pub remaining: f64,
    pub relaxations: u32,
    pub tightenings: u32,
    pub span: f64,
    pub idle: f64,
    pub comm_loss: f64,
}

impl From<&RoundRecord> for RoundRow {
    fn from(r: &RoundRecord) -> Self {
        Self {
            round: r.round,
            epsilon: r.epsilon,
            top_level: r.top_level,
            counts: join(&r.counts),
            delta_m: join(&r.delta_m),
            grew: r.grew,
            err_disc: r.err_disc,
            err_input: r.err_input,
            err_rmse: r.err_rmse,
            estimate: r.estimate,
            predicted_cost: r.predicted_cost,
            consumed: r.consumed,
            remaining: r.remaining,
            relaxations: r.relaxations,
            tightenings: r.tightenings,
            span: r.span,
            idle: r.idle,
            comm_loss: r.comm_loss,
        }
    }
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut log = CsvLog::create(path, TRACE_HEADER)?;
    for row in rows {
        log.append(row)?;
    }
    Ok(())
}

/// Reads a CSV written by [`CsvLog`], skipping the version comment.
pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file);
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(CliError::csv(path))
}
