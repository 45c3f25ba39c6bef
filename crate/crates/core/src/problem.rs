//! Control-problem formulation: what the agent sees, how its output becomes
//! a setpoint, and how a control interval is scored.

use std::fmt;

use chrono::{NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::building::{
    self, BuildingState, ScheduleSet, WeatherSeries, SETPOINT_MAX_C, SETPOINT_MIN_C,
};

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("observation spec has {spec} features but {got} raw values were supplied")]
    FeatureCount { spec: usize, got: usize },
    #[error("external signal required by the observation spec is missing")]
    MissingSignal,
    #[error("invalid observation spec: {0}")]
    Spec(String),
    #[error("invalid action: {0}")]
    Action(String),
    #[error("energies must be non-negative (baseline {baseline}, actual {actual})")]
    NegativeEnergy { baseline: f64, actual: f64 },
    #[error("invalid reward config: {0}")]
    Reward(String),
    #[error("invalid signal schedule: {0}")]
    Schedule(String),
}

pub type Result<T, E = ProblemError> = std::result::Result<T, E>;

/// Normalized values are clipped to this range after min-max scaling.
pub const NORMALIZED_CLIP: (f64, f64) = (-0.5, 1.5);

pub mod feature {
    pub const TOUT: &str = "tout_c";
    pub const TIN: &str = "tin_c";
    pub const OCCUPANCY: &str = "occupancy";
    pub const LIGHTING: &str = "lighting";
    pub const EQUIPMENT: &str = "equipment";
    pub const SETPOINT: &str = "setpoint_c";
    pub const SIGNAL: &str = "signal";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Constant,
    Dynamic,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Constant => "constant",
            Task::Dynamic => "dynamic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl FeatureSpec {
    pub fn new(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            min,
            max,
        }
    }

    pub fn normalize(&self, raw: f64) -> f64 {
        let scaled = (raw - self.min) / (self.max - self.min);
        scaled.clamp(NORMALIZED_CLIP.0, NORMALIZED_CLIP.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub features: Vec<FeatureSpec>,
    pub include_external: bool,
}

impl ObservationSpec {
    /// Outdoor temp, indoor temp, three schedule fractions, setpoint, and
    /// optionally the external signal.
    pub fn standard(include_external: bool) -> Self {
        let mut features = vec![
            FeatureSpec::new(feature::TOUT, 20.0, 40.0),
            FeatureSpec::new(feature::TIN, 20.0, 32.0),
            FeatureSpec::new(feature::OCCUPANCY, 0.0, 1.0),
            FeatureSpec::new(feature::LIGHTING, 0.0, 1.0),
            FeatureSpec::new(feature::EQUIPMENT, 0.0, 1.0),
            FeatureSpec::new(feature::SETPOINT, SETPOINT_MIN_C, SETPOINT_MAX_C),
        ];
        if include_external {
            features.push(FeatureSpec::new(feature::SIGNAL, 0.0, 1.0));
        }
        Self {
            features,
            include_external,
        }
    }

    pub fn for_task(task: Task) -> Self {
        Self::standard(task == Task::Dynamic)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(ProblemError::Spec("no features".into()));
        }
        for f in &self.features {
            if !(f.min.is_finite() && f.max.is_finite() && f.min < f.max) {
                return Err(ProblemError::Spec(format!(
                    "feature `{}` needs finite min < max",
                    f.name
                )));
            }
        }
        let has_signal = self.features.iter().any(|f| f.name == feature::SIGNAL);
        if has_signal != self.include_external {
            return Err(ProblemError::Spec(
                "include_external must match the presence of the signal feature".into(),
            ));
        }
        Ok(())
    }

    /// Min-max scales `raw` (in feature order) with clipping.
    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.features.len() {
            return Err(ProblemError::FeatureCount {
                spec: self.features.len(),
                got: raw.len(),
            });
        }
        Ok(self
            .features
            .iter()
            .zip(raw)
            .map(|(f, &x)| f.normalize(x))
            .collect())
    }
}

/// Raw feature values in the standard order for the state at `state.time`.
pub fn raw_features(
    state: &BuildingState,
    weather: &WeatherSeries,
    schedules: &ScheduleSet,
    signal: Option<f64>,
) -> Vec<f64> {
    let (tout, _) = weather.at(state.time);
    let f = building::schedule_at(schedules, state.time);
    let mut raw = vec![
        tout,
        state.t_air_c,
        f.occupancy,
        f.lighting,
        f.equipment,
        state.setpoint_c,
    ];
    if let Some(s) = signal {
        raw.push(s);
    }
    raw
}

/// Normalized observation vector for `state`.
pub fn build_observation(
    state: &BuildingState,
    weather: &WeatherSeries,
    schedules: &ScheduleSet,
    spec: &ObservationSpec,
    signal: Option<f64>,
) -> Result<Vec<f64>> {
    let signal = match (spec.include_external, signal) {
        (true, None) => return Err(ProblemError::MissingSignal),
        (true, s) => s,
        (false, _) => None,
    };
    let raw = raw_features(state, weather, schedules, signal);
    spec.normalize(&raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    DiscreteDelta,
    ContinuousDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Action {
    Discrete(usize),
    Continuous(f64),
}

impl Action {
    /// Scalar form used in logs and on the wire.
    pub fn value(&self) -> f64 {
        match *self {
            Action::Discrete(i) => i as f64,
            Action::Continuous(v) => v,
        }
    }
}

/// Setpoint deltas for discrete indices 0, 1, 2 (the agent's -1, 0, +1).
pub const DISCRETE_DELTAS_C: [f64; 3] = [-0.5, 0.0, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub kind: ActionKind,
    pub low: f64,
    pub high: f64,
    pub setpoint_min_c: f64,
    pub setpoint_max_c: f64,
}

impl ActionSpec {
    pub fn discrete() -> Self {
        Self {
            kind: ActionKind::DiscreteDelta,
            low: DISCRETE_DELTAS_C[0],
            high: DISCRETE_DELTAS_C[2],
            setpoint_min_c: SETPOINT_MIN_C,
            setpoint_max_c: SETPOINT_MAX_C,
        }
    }

    pub fn continuous() -> Self {
        Self {
            kind: ActionKind::ContinuousDelta,
            ..Self::discrete()
        }
    }

    pub fn n_discrete(&self) -> usize {
        DISCRETE_DELTAS_C.len()
    }

    /// Whether `action` lies inside the declared action space.
    pub fn check(&self, action: Action) -> Result<()> {
        match (self.kind, action) {
            (ActionKind::DiscreteDelta, Action::Discrete(i)) if i < DISCRETE_DELTAS_C.len() => Ok(()),
            (ActionKind::ContinuousDelta, Action::Continuous(v))
                if v.is_finite() && v >= self.low && v <= self.high =>
            {
                Ok(())
            }
            (_, a) => Err(ProblemError::Action(format!(
                "{a:?} is outside the {:?} space [{}, {}]",
                self.kind, self.low, self.high
            ))),
        }
    }
}

/// New setpoint after applying `action` to `setpoint_c`, clamped to bounds.
pub fn apply_action(setpoint_c: f64, action: Action, spec: &ActionSpec) -> Result<f64> {
    let delta = match (spec.kind, action) {
        (ActionKind::DiscreteDelta, Action::Discrete(i)) => *DISCRETE_DELTAS_C
            .get(i)
            .ok_or_else(|| ProblemError::Action(format!("discrete index {i} is not 0, 1 or 2")))?,
        (ActionKind::ContinuousDelta, Action::Continuous(v)) => {
            if !v.is_finite() {
                return Err(ProblemError::Action("continuous action is not finite".into()));
            }
            v.clamp(spec.low, spec.high)
        }
        (kind, a) => {
            return Err(ProblemError::Action(format!(
                "{a:?} does not belong to a {kind:?} action space"
            )))
        }
    };
    Ok((setpoint_c + delta).clamp(spec.setpoint_min_c, spec.setpoint_max_c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub c_offset: f64,
    pub k_target: f64,
    #[serde(rename = "e_base_floor_W")]
    pub e_base_floor_w: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            c_offset: 1.4,
            k_target: 0.15,
            e_base_floor_w: 1000.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.k_target) {
            return Err(ProblemError::Reward("k_target must lie in [0, 1)".into()));
        }
        if !(self.e_base_floor_w > 0.0) {
            return Err(ProblemError::Reward("e_base_floor_W must be positive".into()));
        }
        if !self.c_offset.is_finite() {
            return Err(ProblemError::Reward("c_offset must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    pub reward: f64,
    pub valid: bool,
    /// Achieved minus target reduction fraction; 0 when invalid.
    pub control_error: f64,
}

/// Achieved reduction fraction minus the target.
pub fn control_error(e_baseline_w: f64, e_actual_w: f64, k_target: f64) -> f64 {
    (e_baseline_w - e_actual_w) / e_baseline_w - k_target
}

/// `c - 10 * |reduction - k_target|`; steps whose baseline is below the
/// floor are marked invalid with zero reward.
pub fn reward(
    e_baseline_w: f64,
    e_actual_w: f64,
    k_target: f64,
    cfg: &RewardConfig,
) -> Result<RewardOutcome> {
    if e_baseline_w < 0.0 || e_actual_w < 0.0 {
        return Err(ProblemError::NegativeEnergy {
            baseline: e_baseline_w,
            actual: e_actual_w,
        });
    }
    if e_baseline_w < cfg.e_base_floor_w {
        return Ok(RewardOutcome {
            reward: 0.0,
            valid: false,
            control_error: 0.0,
        });
    }
    let err = control_error(e_baseline_w, e_actual_w, k_target);
    Ok(RewardOutcome {
        reward: cfg.c_offset - err.abs() * 10.0,
        valid: true,
        control_error: err,
    })
}

/// One `[start, end)` window of a daily signal schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEntry {
    #[serde(with = "hhmm")]
    pub start: NaiveTime,
    #[serde(with = "hhmm")]
    pub end: NaiveTime,
    pub signal: f64,
}

mod hhmm {
    use chrono::NaiveTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.format("%H:%M").to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveTime, D::Error> {
        let s = String::deserialize(d)?;
        if s == "24:00" {
            return Ok(NaiveTime::from_hms_nano_opt(23, 59, 59, 999_999_999).expect("valid"));
        }
        NaiveTime::parse_from_str(&s, "%H:%M").map_err(serde::de::Error::custom)
    }
}

/// Signal levels and the reduction fraction each one requests.
pub const SIGNAL_LEVELS: [(f64, f64); 3] = [(0.0, 0.0), (0.5, 0.15), (1.0, 0.30)];

pub fn signal_to_k(signal: f64) -> Option<f64> {
    SIGNAL_LEVELS
        .iter()
        .find(|(s, _)| *s == signal)
        .map(|&(_, k)| k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSchedule {
    pub entries: Vec<SignalEntry>,
}

impl Default for SignalSchedule {
    /// Demand-response requests from 08:00 to 19:00.
    fn default() -> Self {
        let e = |s: u32, e: u32, signal: f64| SignalEntry {
            start: NaiveTime::from_hms_opt(s, 0, 0).expect("valid"),
            end: NaiveTime::from_hms_opt(e, 0, 0).expect("valid"),
            signal,
        };
        Self {
            entries: vec![
                e(8, 11, 0.0),
                e(11, 13, 1.0),
                e(13, 14, 0.0),
                e(14, 16, 0.5),
                e(16, 17, 0.0),
                e(17, 19, 1.0),
            ],
        }
    }
}

impl SignalSchedule {
    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            if e.start >= e.end {
                return Err(ProblemError::Schedule(format!("entry {i} ends before it starts")));
            }
            if signal_to_k(e.signal).is_none() {
                return Err(ProblemError::Schedule(format!(
                    "entry {i} has signal {} (allowed: 0, 0.5, 1)",
                    e.signal
                )));
            }
            for (j, other) in self.entries.iter().enumerate().skip(i + 1) {
                if e.start < other.end && other.start < e.end {
                    return Err(ProblemError::Schedule(format!("entries {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    /// `(signal, k_target)` in force at `t`; `(0, 0)` outside every window.
    pub fn signal_at(&self, t: NaiveDateTime) -> (f64, f64) {
        let tod = NaiveTime::from_hms_opt(t.hour(), t.minute(), t.second()).expect("valid");
        self.entries
            .iter()
            .find(|e| tod >= e.start && tod < e.end)
            .map(|e| (e.signal, signal_to_k(e.signal).unwrap_or(0.0)))
            .unwrap_or((0.0, 0.0))
    }
}

/// Everything needed to turn environment output into agent input and reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
    pub observation: ObservationSpec,
    pub action: ActionSpec,
    pub reward: RewardConfig,
    pub signals: SignalSchedule,
}

impl TaskSpec {
    pub fn new(task: Task, action: ActionSpec) -> Self {
        Self {
            task,
            observation: ObservationSpec::for_task(task),
            action,
            reward: RewardConfig::default(),
            signals: SignalSchedule::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.observation.validate()?;
        self.reward.validate()?;
        self.signals.validate()?;
        if (self.task == Task::Dynamic) != self.observation.include_external {
            return Err(ProblemError::Spec(format!(
                "the {} task {} the external signal feature",
                self.task,
                if self.task == Task::Dynamic {
                    "requires"
                } else {
                    "does not use"
                }
            )));
        }
        Ok(())
    }

    /// External signal exposed to the agent at `t`, if the task uses one.
    pub fn signal_at(&self, t: NaiveDateTime) -> Option<f64> {
        self.observation
            .include_external
            .then(|| self.signals.signal_at(t).0)
    }

    /// Reduction target in force at `t`.
    pub fn k_target_at(&self, t: NaiveDateTime) -> f64 {
        match self.task {
            Task::Constant => self.reward.k_target,
            Task::Dynamic => self.signals.signal_at(t).1,
        }
    }
}
