//! Run configuration, read from and echoed as TOML.
//!
//! The file has four sections: `[problem]` (task formulation),
//! `[building]` (simulator parameters, weather and period), `[algorithm]`
//! (learner and hyperparameters) and `[run]` (seed, budget, outputs).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainError;
use crate::algorithms::{Algorithm, Hyperparams};
use crate::building::{self, Building, BuildingConfig, Period, ScheduleSet, WeatherSeries};
use crate::env::hex;
use crate::problem::{ObservationSpec, RewardConfig, SignalSchedule, Task, TaskSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub task: Task,
    #[serde(default)]
    pub reward: RewardConfig,
    /// Daily demand-response schedule (dynamic task only).
    #[serde(default)]
    pub signals: SignalSchedule,
    /// Feature list and normalization bounds; defaults to the task's
    /// standard observation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherSource {
    /// Synthetic weather drawn from this seed.
    Synthetic(u64),
    /// Weather CSV file, relative to the config file's directory.
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingSection {
    #[serde(default = "default_weather")]
    pub weather: WeatherSource,
    #[serde(default = "default_start")]
    pub period_start: NaiveDate,
    #[serde(default = "default_end")]
    pub period_end: NaiveDate,
    #[serde(default)]
    pub params: BuildingConfig,
}

fn default_weather() -> WeatherSource {
    WeatherSource::Synthetic(1)
}

fn default_start() -> NaiveDate {
    Period::august().start
}

fn default_end() -> NaiveDate {
    Period::august().end
}

impl Default for BuildingSection {
    fn default() -> Self {
        Self {
            weather: default_weather(),
            period_start: default_start(),
            period_end: default_end(),
            params: BuildingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub name: Algorithm,
    #[serde(default)]
    pub hyperparams: Hyperparams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvSource {
    Builtin,
    /// `host:port` of a running environment server.
    Remote(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Passes over the period's weekdays; defaults by algorithm family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_env")]
    pub env: EnvSource,
    /// Weather seed for evaluation passes, when it should differ from
    /// training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_weather_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_cache_dir: Option<PathBuf>,
    /// Seconds to wait for each message from a remote environment.
    #[serde(default = "default_timeout")]
    pub remote_timeout_s: f64,
}

fn default_seed() -> u64 {
    1
}

fn default_env() -> EnvSource {
    EnvSource::Builtin
}

fn default_timeout() -> f64 {
    30.0
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            epochs: None,
            output_dir: None,
            env: default_env(),
            eval_weather_seed: None,
            baseline_cache_dir: None,
            remote_timeout_s: default_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub building: BuildingSection,
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub run: RunSection,
}

pub const DEFAULT_EPOCHS_ON_POLICY: usize = 60;
pub const DEFAULT_EPOCHS_OFF_POLICY: usize = 30;

impl RunConfig {
    /// Standard configuration for a task and algorithm.
    pub fn new(task: Task, algorithm: Algorithm) -> Self {
        Self {
            problem: ProblemSection {
                task,
                reward: RewardConfig::default(),
                signals: SignalSchedule::default(),
                observation: None,
            },
            building: BuildingSection::default(),
            algorithm: AlgorithmSection {
                name: algorithm,
                hyperparams: Hyperparams::default(),
            },
            run: RunSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainError::Config(format!("cannot read config `{}`: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let WeatherSource::Csv(p) = &cfg.building.weather {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.building.weather = WeatherSource::Csv(base.join(p));
            }
        }
        if let WeatherSource::Csv(p) = &cfg.building.weather {
            if !p.exists() {
                return Err(TrainError::Config(format!("weather file `{}` does not exist", p.display())));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.task_spec().validate()?;
        self.algorithm.hyperparams.validate()?;
        self.building.params.validate()?;
        self.period()?;
        if !(self.run.remote_timeout_s > 0.0 && self.run.remote_timeout_s.is_finite()) {
            return Err(TrainError::Config("remote_timeout_s must be positive".into()));
        }
        Ok(())
    }

    pub fn task_spec(&self) -> TaskSpec {
        let mut spec = TaskSpec::new(self.problem.task, self.algorithm.name.action_spec());
        spec.reward = self.problem.reward;
        spec.signals = self.problem.signals.clone();
        if let Some(obs) = &self.problem.observation {
            spec.observation = obs.clone();
        }
        spec
    }

    pub fn period(&self) -> Result<Period, TrainError> {
        Ok(Period::new(self.building.period_start, self.building.period_end)?)
    }

    pub fn epochs(&self) -> usize {
        self.run.epochs.unwrap_or(if self.algorithm.name.is_off_policy() {
            DEFAULT_EPOCHS_OFF_POLICY
        } else {
            DEFAULT_EPOCHS_ON_POLICY
        })
    }

    /// Weather for training, or for evaluation when `eval` is set and an
    /// evaluation seed is configured.
    pub fn weather(&self, eval: bool) -> Result<WeatherSeries, TrainError> {
        let period = self.period()?;
        let eval_seed = if eval { self.run.eval_weather_seed } else { None };
        match (&self.building.weather, eval_seed) {
            (_, Some(seed)) | (&WeatherSource::Synthetic(seed), None) => {
                Ok(building::synth_weather(seed, period.start, period.end)?)
            }
            (WeatherSource::Csv(path), None) => Ok(building::load_weather_csv(path)?),
        }
    }

    pub fn building(&self, eval: bool) -> Result<Building, TrainError> {
        Ok(Building::new(self.building.params, self.weather(eval)?, ScheduleSet::default())?)
    }

    /// Copy with every default written out, as echoed to `config.resolved`.
    pub fn resolved(&self) -> RunConfig {
        let mut cfg = self.clone();
        cfg.run.epochs = Some(self.epochs());
        cfg.problem.observation = Some(self.task_spec().observation);
        cfg
    }

    pub fn to_toml(&self) -> Result<String, TrainError> {
        toml::to_string(self).map_err(|e| TrainError::Config(e.to_string()))
    }

    /// SHA-256 of the resolved configuration with the output location
    /// removed, so moving a run changes nothing it records.
    pub fn digest(&self) -> String {
        let mut cfg = self.resolved();
        cfg.run.output_dir = None;
        cfg.run.baseline_cache_dir = None;
        let text = serde_json::to_string(&cfg).expect("config serializes");
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        hex(&h.finalize())
    }

    /// Applies one `key = value` override; keys name hyperparameters
    /// (`lr_actor`) or dotted config paths (`run.seed`).
    pub fn set(&mut self, key: &str, value: &toml::Value) -> Result<(), TrainError> {
        let path: Vec<&str> = if key.contains('.') {
            key.split('.').collect()
        } else {
            vec!["algorithm", "hyperparams", key]
        };
        let mut doc = toml::Value::try_from(&*self).map_err(|e| TrainError::Config(e.to_string()))?;
        let mut slot = &mut doc;
        for (i, part) in path.iter().enumerate() {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| TrainError::Config(format!("`{key}` does not name a setting")))?;
            if i + 1 == path.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            slot = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let updated: RunConfig = doc
            .try_into()
            .map_err(|e: toml::de::Error| TrainError::Config(format!("override `{key}`: {}", e.message())))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    /// Human-readable summary echoed by the command line.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "task={} algorithm={} seed={} epochs={} period={}..={}",
            self.problem.task,
            self.algorithm.name,
            self.run.seed,
            self.epochs(),
            self.building.period_start,
            self.building.period_end
        );
        s
    }
}
