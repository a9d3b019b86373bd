//! Layered run configuration: preset, then config file, then flags.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fscd::data::{CleanConfig, ColumnMap, FlagSet, Session, TradeFlag};
use fscd::mcmc::SamplerConfig;
use fscd::priors::{merge_toml, preset_text, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_DIR_VAR: &str = "FSCD_CONFIG_DIR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub burn_in: Option<usize>,
    pub sweeps: Option<usize>,
    pub thin: Option<usize>,
    pub dof: Option<f64>,
    pub target_rate: Option<f64>,
    pub seed: Option<u64>,
    pub warm_start: Option<bool>,
}

impl SamplerSection {
    pub fn resolve(&self) -> SamplerConfig {
        let d = SamplerConfig::default();
        SamplerConfig {
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            sweeps: self.sweeps.unwrap_or(d.sweeps),
            thin: self.thin.unwrap_or(d.thin),
            dof: self.dof.unwrap_or(d.dof),
            target_rate: self.target_rate.unwrap_or(d.target_rate),
            seed: self.seed.unwrap_or(d.seed),
            warm_start: self.warm_start.unwrap_or(d.warm_start),
            ..d
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanSection {
    pub sessions: Option<Vec<String>>,
    pub blacklist: Option<Vec<String>>,
    pub window: Option<usize>,
    pub gamma: Option<f64>,
    pub floor: Option<f64>,
    /// `none`, `same-second` or `gw`.
    pub rule: Option<String>,
}

impl CleanSection {
    pub fn resolve(&self) -> Result<CleanConfig, CliError> {
        let d = CleanConfig::default();
        let sessions = match &self.sessions {
            Some(v) => v
                .iter()
                .map(|s| s.parse::<Session>())
                .collect::<Result<BTreeSet<_>, _>>()
                .map_err(CliError::config)?,
            None => d.sessions,
        };
        let blacklist = match &self.blacklist {
            Some(v) => v
                .iter()
                .map(|s| s.parse::<TradeFlag>())
                .collect::<Result<FlagSet, _>>()
                .map_err(CliError::config)?,
            None => d.blacklist,
        };
        Ok(CleanConfig {
            sessions,
            blacklist,
            window: self.window.unwrap_or(d.window),
            gamma: self.gamma.unwrap_or(d.gamma),
            floor: self.floor.unwrap_or(d.floor),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSection {
    pub day: Option<String>,
    pub time: Option<String>,
    pub price: Option<String>,
    pub volume: Option<String>,
    pub session: Option<String>,
    pub flags: Option<String>,
}

impl ColumnSection {
    pub fn resolve(&self) -> ColumnMap {
        let d = ColumnMap::default();
        ColumnMap {
            day: self.day.clone().unwrap_or(d.day),
            time: self.time.clone().unwrap_or(d.time),
            price: self.price.clone().unwrap_or(d.price),
            volume: self.volume.clone().unwrap_or(d.volume),
            session: self.session.clone().or(d.session),
            flags: self.flags.clone().or(d.flags),
        }
    }
}

/// Everything a command may read from its configuration layers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub sampler: SamplerSection,
    pub clean: CleanSection,
    pub columns: ColumnSection,
    /// The merged layers, as written to the manifest.
    pub effective: toml::Table,
}

/// File named by `--config`, else the same name under the config directory.
pub fn locate(path: &Path) -> Result<PathBuf, CliError> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(CONFIG_DIR_VAR) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return Ok(candidate);
            }
        }
    }
    Err(CliError::missing(path))
}

/// A preset name is looked up in the config directory first, then among the
/// built-in presets.
fn preset_layer(name: &str) -> Result<String, CliError> {
    if let Some(dir) = std::env::var_os(CONFIG_DIR_VAR) {
        let candidate = Path::new(&dir).join(format!("{name}.toml"));
        if candidate.exists() {
            return std::fs::read_to_string(&candidate).map_err(|e| CliError::io(&candidate, e));
        }
    }
    Ok(preset_text(name).map_err(CliError::from)?.to_string())
}

fn parse_layer(text: &str, origin: &str) -> Result<toml::Table, CliError> {
    toml::from_str(text).map_err(|e| CliError::config(format!("{origin}: {e}")))
}

fn section<T: for<'de> Deserialize<'de> + Default>(table: &mut toml::Table, key: &str) -> Result<T, CliError> {
    match table.remove(key) {
        Some(v) => v.try_into().map_err(|e: toml::de::Error| CliError::config(format!("[{key}]: {e}"))),
        None => Ok(T::default()),
    }
}

pub fn load(preset: &str, file: Option<&Path>, overrides: toml::Table) -> Result<RunConfig, CliError> {
    let mut merged = parse_layer(&preset_layer(preset)?, &format!("preset {preset}"))?;
    if let Some(path) = file {
        let path = locate(path)?;
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        merge_toml(&mut merged, parse_layer(&text, &path.display().to_string())?);
    }
    merge_toml(&mut merged, overrides);
    let effective = merged.clone();
    let mut rest = merged;
    let sampler = section(&mut rest, "sampler")?;
    let clean = section(&mut rest, "clean")?;
    let columns = section(&mut rest, "columns")?;
    let text = toml::to_string(&rest).map_err(|e| CliError::config(e.to_string()))?;
    let model = ModelConfig::from_layers(&[&text])?;
    Ok(RunConfig {
        model,
        sampler,
        clean,
        columns,
        effective,
    })
}

/// `section.key = value` override table.
pub fn set(table: &mut toml::Table, section: &str, key: &str, value: impl Into<toml::Value>) {
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    if let toml::Value::Table(t) = entry {
        t.insert(key.to_string(), value.into());
    }
}
