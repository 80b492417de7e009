//! Run configuration files and command-line overrides.
//!
//! A configuration is a TOML document with the sections `model`, `method`,
//! `scheduler` and `output`. `--set key.path=value` edits the parsed document
//! before it is checked, so overrides obey the same rules as the file.

use std::path::{Path, PathBuf};

use bmlmc::controller::BmlmcConfig;
use bmlmc::models::ModelSpec;
use bmlmc::scheduler::SchedulerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub method: BmlmcConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Append one row per executed round to `rounds.csv` while running.
    pub rounds_csv: bool,
    pub report_json: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            rounds_csv: true,
            report_json: true,
        }
    }
}

impl RunConfig {
    /// Reads `path` and applies `overrides` in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text, overrides).map_err(|e| match e {
            CliError::Config {
                origin: None,
                message,
            } => CliError::Config {
                origin: Some(path.to_owned()),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(config_error)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let config: RunConfig = toml::Value::Table(table).try_into().map_err(config_error)?;
        config.method.validate()?;
        config.scheduler.validate()?;
        Ok(config)
    }

    pub fn to_table(&self) -> Result<toml::Table> {
        match toml::Value::try_from(self).map_err(config_error)? {
            toml::Value::Table(t) => Ok(t),
            _ => unreachable!("a struct serializes to a table"),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(config_error)
    }

    /// Copy with one more override applied.
    pub fn with_override(&self, assignment: &str) -> Result<Self> {
        let mut table = self.to_table()?;
        apply_override(&mut table, assignment)?;
        Self::from_table(table)
    }

    /// The configuration as recorded in reports. The seed is reported
    /// separately; worker count and output location do not influence results
    /// and are left out so that reports can be compared byte for byte.
    pub fn echo(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output");
            if let Some(m) = obj.get_mut("method").and_then(|m| m.as_object_mut()) {
                m.remove("master_seed");
            }
            if let Some(s) = obj.get_mut("scheduler").and_then(|s| s.as_object_mut()) {
                s.remove("workers");
            }
        }
        Ok(v)
    }
}

fn config_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config {
        origin: None,
        message: e.to_string().trim_end().to_owned(),
    }
}

/// Sets `key.path` to `value`, creating intermediate tables. The value is
/// read as a TOML value when possible and as a plain string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Override(assignment.to_owned()))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Override(assignment.to_owned()));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));

    let (last, parents) = path.split_last().expect("non-empty path");
    let mut current = table;
    for part in parents {
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(CliError::Config {
                    origin: None,
                    message: format!("`{part}` in `{key}` is not a table"),
                })
            }
        };
    }
    current.insert(last.to_string(), value);
    Ok(())
}
