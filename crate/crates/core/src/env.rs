//! The environment interface the trainer drives, and the builtin simulator
//! behind it.
//!
//! An environment reports raw feature values and the cooling rates of the
//! interval just simulated; normalization and reward are the trainer's job.
//! After `reset` the environment emits one observation at the window start,
//! then one per action. The observation that reaches the window end carries
//! `done = true`.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::building::{
    BaselineSeries, Building, BuildingState, Period, SimError, BASELINE_OCCUPIED_SETPOINT_C,
    CONTROL_INTERVAL_S,
};
use crate::problem::{self, Action, ActionSpec, ProblemError, TaskSpec};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("bad action: {0}")]
    BadAction(String),
    #[error("no episode in progress")]
    NotReset,
    #[error("invalid episode window: {0}")]
    Window(String),
    #[error("environment spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("remote environment reported {code}: {message}")]
    Remote { code: String, message: String },
    #[error("no message from the environment within {0:?}")]
    Timeout(std::time::Duration),
    #[error("environment connection closed")]
    Closed,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// What an environment exposes before the first episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub features: Vec<String>,
    pub action: ActionSpec,
}

/// Episode request: control runs from `start` until `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeWindow {
    pub seed: u64,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl EpisodeWindow {
    pub fn steps(&self) -> usize {
        ((self.end - self.start).num_seconds() / CONTROL_INTERVAL_S).max(0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvObservation {
    pub time: NaiveDateTime,
    /// Raw feature values in the order of [`EnvSpec::features`].
    pub features: Vec<f64>,
    /// Mean coil cooling over the interval that ended at `time`.
    pub cooling_w: f64,
    /// Baseline cooling over the same interval.
    pub baseline_w: f64,
    pub done: bool,
}

pub trait Environment {
    fn spec(&self) -> EnvSpec;
    fn reset(&mut self, window: &EpisodeWindow) -> Result<EnvObservation, EnvError>;
    fn step(&mut self, action: Action) -> Result<EnvObservation, EnvError>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn spec(&self) -> EnvSpec {
        (**self).spec()
    }

    fn reset(&mut self, window: &EpisodeWindow) -> Result<EnvObservation, EnvError> {
        (**self).reset(window)
    }

    fn step(&mut self, action: Action) -> Result<EnvObservation, EnvError> {
        (**self).step(action)
    }
}

/// Content digest of everything a baseline run depends on.
pub fn baseline_digest(building: &Building, period: Period) -> String {
    let payload = serde_json::json!({
        "config": building.config,
        "weather": building.weather.records(),
        "schedules": building.schedules,
        "period": period,
    });
    let mut h = Sha256::new();
    h.update(payload.to_string().as_bytes());
    hex(&h.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
struct CachedBaseline {
    start: NaiveDateTime,
    cooling_w: Vec<f64>,
    states: Vec<BuildingState>,
}

/// Baseline runs keyed by content digest, kept in memory and optionally on
/// disk.
#[derive(Debug, Default)]
pub struct BaselineCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, Arc<BaselineSeries>>>,
}

impl BaselineCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self {
            dir,
            memory: Mutex::default(),
        }
    }

    /// Process-wide in-memory cache.
    pub fn shared() -> &'static BaselineCache {
        static SHARED: OnceLock<BaselineCache> = OnceLock::new();
        SHARED.get_or_init(BaselineCache::default)
    }

    pub fn get(&self, building: &Building, period: Period) -> Result<Arc<BaselineSeries>, SimError> {
        let key = baseline_digest(building, period);
        if let Some(hit) = self.memory.lock().expect("baseline cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let series = Arc::new(self.load_or_run(&key, building, period)?);
        self.memory
            .lock()
            .expect("baseline cache poisoned")
            .insert(key, series.clone());
        Ok(series)
    }

    fn load_or_run(&self, key: &str, building: &Building, period: Period) -> Result<BaselineSeries, SimError> {
        let path = self.dir.as_ref().map(|d| d.join(format!("baseline-{key}.json")));
        if let Some(path) = &path {
            // serde_json is built with exact float round-tripping, so a cached
            // series is bitwise equal to a fresh run.
            if let Ok(text) = fs::read_to_string(path) {
                if let Ok(c) = serde_json::from_str::<CachedBaseline>(&text) {
                    return Ok(BaselineSeries {
                        start: c.start,
                        cooling_w: c.cooling_w,
                        states: c.states,
                    });
                }
            }
        }
        let series = building.run_baseline(period)?;
        if let Some(path) = &path {
            let cached = CachedBaseline {
                start: series.start,
                cooling_w: series.cooling_w.clone(),
                states: series.states.clone(),
            };
            let text = serde_json::to_string(&cached).map_err(|e| SimError::Config(e.to_string()))?;
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(SimError::Io)?;
            }
            fs::write(path, text).map_err(SimError::Io)?;
        }
        Ok(series)
    }
}

struct Episode {
    state: BuildingState,
    index: usize,
    end: NaiveDateTime,
}

/// The RC building simulator wrapped with the task's observation features.
pub struct BuiltinEnv {
    building: Building,
    task: TaskSpec,
    baseline: Arc<BaselineSeries>,
    episode: Option<Episode>,
}

impl BuiltinEnv {
    pub fn new(building: Building, task: TaskSpec, period: Period, cache: &BaselineCache) -> Result<Self, EnvError> {
        task.validate()?;
        let baseline = cache.get(&building, period)?;
        Ok(Self {
            building,
            task,
            baseline,
            episode: None,
        })
    }

    pub fn baseline(&self) -> &BaselineSeries {
        &self.baseline
    }

    pub fn building(&self) -> &Building {
        &self.building
    }

    fn observe(&self, state: &BuildingState, cooling_w: f64, baseline_w: f64, done: bool) -> EnvObservation {
        let signal = self.task.signal_at(state.time);
        EnvObservation {
            time: state.time,
            features: problem::raw_features(state, &self.building.weather, &self.building.schedules, signal),
            cooling_w,
            baseline_w,
            done,
        }
    }
}

impl Environment for BuiltinEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            features: self.task.observation.names(),
            action: self.task.action,
        }
    }

    fn reset(&mut self, window: &EpisodeWindow) -> Result<EnvObservation, EnvError> {
        let index = self
            .baseline
            .index_of(window.start)
            .filter(|&i| i > 0)
            .ok_or_else(|| EnvError::Window(format!("{} is not a control instant of the simulated period", window.start)))?;
        if window.steps() == 0 || self.baseline.index_of(window.end - Duration::seconds(CONTROL_INTERVAL_S)).is_none() {
            return Err(EnvError::Window(format!("{} .. {} is empty or leaves the simulated period", window.start, window.end)));
        }
        let mut state = self.baseline.states[index];
        state.setpoint_c = BASELINE_OCCUPIED_SETPOINT_C;
        let previous = self.baseline.cooling_w[index - 1];
        let obs = self.observe(&state, state.last_interval_cooling_w, previous, false);
        self.episode = Some(Episode {
            state,
            index,
            end: window.end,
        });
        Ok(obs)
    }

    fn step(&mut self, action: Action) -> Result<EnvObservation, EnvError> {
        let episode = self.episode.as_ref().ok_or(EnvError::NotReset)?;
        self.task
            .action
            .check(action)
            .map_err(|e| EnvError::BadAction(e.to_string()))?;
        let setpoint = problem::apply_action(episode.state.setpoint_c, action, &self.task.action)?;
        let (next, cooling) = self.building.step(&episode.state, setpoint)?;
        let baseline_w = self.baseline.cooling_w[episode.index];
        let done = next.time >= episode.end;
        let obs = self.observe(&next, cooling, baseline_w, done);
        if done {
            self.episode = None;
        } else {
            let index = episode.index + 1;
            let end = episode.end;
            self.episode = Some(Episode { state: next, index, end });
        }
        Ok(obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::building::{synth_weather, BuildingConfig, ScheduleSet};
    use crate::problem::Task;
    use chrono::NaiveDate;

    fn env(task: Task, action: ActionSpec) -> BuiltinEnv {
        let period = Period::new(
            NaiveDate::from_ymd_opt(2023, 8, 1).unwrap(),
            NaiveDate::from_ymd_opt(2023, 8, 3).unwrap(),
        )
        .unwrap();
        let weather = synth_weather(1, period.start, period.end).unwrap();
        let building = Building::new(BuildingConfig::default(), weather, ScheduleSet::default()).unwrap();
        BuiltinEnv::new(building, TaskSpec::new(task, action), period, &BaselineCache::default()).unwrap()
    }

    fn window(day: u32) -> EpisodeWindow {
        let d = NaiveDate::from_ymd_opt(2023, 8, day).unwrap();
        EpisodeWindow {
            seed: 0,
            start: d.and_hms_opt(8, 0, 0).unwrap(),
            end: d.and_hms_opt(19, 0, 0).unwrap(),
        }
    }

    #[test]
    fn holding_baseline_setpoint_reproduces_baseline() {
        let mut e = env(Task::Constant, ActionSpec::discrete());
        let first = e.reset(&window(2)).unwrap();
        assert_eq!(first.features.len(), 6);
        assert_eq!(first.features[5], 24.0);
        let mut steps = 0;
        loop {
            let obs = e.step(Action::Discrete(1)).unwrap();
            steps += 1;
            assert_eq!(obs.cooling_w, obs.baseline_w, "step {steps}");
            if obs.done {
                break;
            }
        }
        assert_eq!(steps, 66);
        assert!(matches!(e.step(Action::Discrete(1)), Err(EnvError::NotReset)));
    }

    #[test]
    fn dynamic_task_reports_signal() {
        let mut e = env(Task::Dynamic, ActionSpec::continuous());
        let mut obs = e.reset(&window(1)).unwrap();
        while obs.time.format("%H:%M").to_string() != "12:30" {
            obs = e.step(Action::Continuous(0.0)).unwrap();
        }
        assert_eq!(obs.features.len(), 7);
        assert_eq!(obs.features[6], 1.0);
    }

    #[test]
    fn bad_actions_are_rejected_without_ending_the_episode() {
        let mut e = env(Task::Constant, ActionSpec::continuous());
        e.reset(&window(1)).unwrap();
        assert!(matches!(e.step(Action::Continuous(0.9)), Err(EnvError::BadAction(_))));
        assert!(matches!(e.step(Action::Discrete(0)), Err(EnvError::BadAction(_))));
        assert!(e.step(Action::Continuous(0.5)).is_ok());
    }

    #[test]
    fn windows_outside_the_period_are_rejected() {
        let mut e = env(Task::Constant, ActionSpec::discrete());
        let mut w = window(3);
        w.end = NaiveDate::from_ymd_opt(2023, 8, 4).unwrap().and_hms_opt(9, 0, 0).unwrap();
        assert!(matches!(e.reset(&w), Err(EnvError::Window(_))));
    }

    #[test]
    fn disk_cache_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let e = env(Task::Constant, ActionSpec::discrete());
        let period = Period::new(
            NaiveDate::from_ymd_opt(2023, 8, 1).unwrap(),
            NaiveDate::from_ymd_opt(2023, 8, 3).unwrap(),
        )
        .unwrap();
        let first = BaselineCache::new(Some(dir.path().to_path_buf())).get(e.building(), period).unwrap();
        let second = BaselineCache::new(Some(dir.path().to_path_buf())).get(e.building(), period).unwrap();
        assert_eq!(*first, *second);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
