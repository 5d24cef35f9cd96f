//! Run configuration: one TOML document holding every module's settings.
//!
//! Unknown keys are rejected at every level. Any value can be overridden
//! from the environment with `PVP__<section>__<key>[__<key>...]=<toml value>`,
//! for example `PVP__LEARNER__BATCH_SIZE=256` or `PVP__RUN__OUT_DIR=runs/a`.
//! Values that do not parse as TOML are taken as strings.

use std::path::{Path, PathBuf};

use pvp_sim::{EnvConfig, SceneConfig};
use serde::{Deserialize, Serialize};

use crate::bc::BcConfig;
use crate::eval::EvalConfig;
use crate::expert::ExpertConfig;
use crate::gate::GateConfig;
use crate::learner::LearnerConfig;
use crate::td3::Td3Config;
use crate::CoreError;

pub const ENV_PREFIX: &str = "PVP__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub total_steps: u64,
    pub out_dir: PathBuf,
    /// Checkpoint cadence in steps; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
    pub record_trajectories: bool,
    /// Control period in seconds when pacing against the wall clock.
    pub live_tick: f64,
    /// Send all lidar rays in telemetry instead of every fourth.
    pub verbose_lidar: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            total_steps: 2000,
            out_dir: PathBuf::from("runs/default"),
            checkpoint_every: 1000,
            record_trajectories: true,
            live_tick: 0.2,
            verbose_lidar: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub bc: BcConfig,
    pub td3: Td3Config,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub scenes: SceneConfig,
    pub learner: LearnerConfig,
    pub gate: GateConfig,
    pub expert: ExpertConfig,
    pub eval: EvalConfig,
    pub run: RunSection,
    pub baselines: BaselineSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CoreError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text` after applying `overrides` as `(dotted path, value)`.
    pub fn from_toml_with<I, K, V>(text: &str, overrides: I) -> Result<Self, CoreError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut doc: toml::Table = toml::from_str(text)?;
        for (k, v) in overrides {
            set_path(&mut doc, k.as_ref(), v.as_ref())?;
        }
        let cfg: RunConfig = doc.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a file (or the defaults when `path` is `None`) with the
    /// process environment overrides applied.
    pub fn load(path: Option<&Path>) -> Result<Self, CoreError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CoreError::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_with(&text, env_overrides(std::env::vars()))
    }

    pub fn to_toml_string(&self) -> Result<String, CoreError> {
        toml::to_string(self).map_err(|e| CoreError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.env.validate()?;
        self.learner.validate()?;
        if !(self.gate.epsilon > 0.0) {
            return Err(CoreError::Config("gate.epsilon must be positive".into()));
        }
        if !self.expert.noise_std.iter().all(|&s| s > 0.0) {
            return Err(CoreError::Config("expert.noise_std must be positive".into()));
        }
        if self.scenes.train_scenes == 0 || self.scenes.num_blocks == 0 {
            return Err(CoreError::Config("scenes.train_scenes and scenes.num_blocks must be at least 1".into()));
        }
        if !(self.run.live_tick > 0.0) {
            return Err(CoreError::Config("run.live_tick must be positive".into()));
        }
        Ok(())
    }
}

/// Picks `PVP__a__b=v` variables and turns them into `("a.b", v)`.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            Some((rest.split("__").collect::<Vec<_>>().join(".").to_lowercase(), v))
        })
        .collect();
    out.sort();
    out
}

fn set_path(doc: &mut toml::Table, path: &str, raw: &str) -> Result<(), CoreError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CoreError::Config(format!("malformed override key '{path}'")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = keys.split_last().expect("non-empty path");
    let mut table = doc;
    for k in parents {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CoreError::Config(format!("override '{path}' descends into a non-table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
