//! Two-node RC thermal model of a single-zone office building.
//!
//! The zone air node exchanges heat with a lumped envelope node and with
//! outdoor air (infiltration); the envelope node exchanges heat with outdoor
//! air and absorbs solar gains. An ideal cooling coil holds the air node at or
//! below the cooling setpoint during the availability window, capped at the
//! coil capacity.

use std::fmt;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Seconds per control interval.
pub const CONTROL_INTERVAL_S: i64 = 600;
/// Seconds per integration substep.
pub const SUBSTEP_S: i64 = 60;
/// Cooling is available from this hour (inclusive)...
pub const COOLING_START_HOUR: u32 = 7;
/// ...until this hour (exclusive).
pub const COOLING_END_HOUR: u32 = 19;
pub const BASELINE_OCCUPIED_SETPOINT_C: f64 = 24.0;
pub const BASELINE_UNOCCUPIED_SETPOINT_C: f64 = 26.7;
pub const SETPOINT_MIN_C: f64 = 23.0;
pub const SETPOINT_MAX_C: f64 = 27.0;

const ISO_MINUTE: &str = "%Y-%m-%dT%H:%M";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("weather load failed at row {row}: {msg}")]
    WeatherRow { row: usize, msg: String },
    #[error("weather load failed: {0}")]
    Weather(String),
    #[error("start date {start} is after end date {end}")]
    DateOrder { start: NaiveDate, end: NaiveDate },
    #[error("non-finite building state at {time}: T_air={t_air}, T_env={t_env}")]
    NonFinite {
        time: NaiveDateTime,
        t_air: f64,
        t_env: f64,
    },
    #[error("invalid building config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Physical parameters of the zone. Serialized key names are part of the
/// config file format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildingConfig {
    pub floor_area_m2: f64,
    pub ceiling_height_m: f64,
    pub occupant_density_m2_per_person: f64,
    #[serde(rename = "lighting_W_per_m2")]
    pub lighting_w_per_m2: f64,
    #[serde(rename = "equipment_W_per_m2")]
    pub equipment_w_per_m2: f64,
    #[serde(rename = "C_air_J_per_K")]
    pub c_air_j_per_k: f64,
    #[serde(rename = "C_env_J_per_K")]
    pub c_env_j_per_k: f64,
    #[serde(rename = "UA_in_W_per_K")]
    pub ua_in_w_per_k: f64,
    #[serde(rename = "UA_out_W_per_K")]
    pub ua_out_w_per_k: f64,
    #[serde(rename = "UA_inf_W_per_K")]
    pub ua_inf_w_per_k: f64,
    #[serde(rename = "A_sol_m2")]
    pub a_sol_m2: f64,
    #[serde(rename = "Q_max_W")]
    pub q_max_w: f64,
    #[serde(rename = "sensible_W_per_person")]
    pub sensible_w_per_person: f64,
}

impl Default for BuildingConfig {
    fn default() -> Self {
        Self {
            floor_area_m2: 511.16,
            ceiling_height_m: 3.05,
            occupant_density_m2_per_person: 23.0,
            lighting_w_per_m2: 15.59,
            equipment_w_per_m2: 8.07,
            c_air_j_per_k: 5.0e6,
            c_env_j_per_k: 4.0e7,
            ua_in_w_per_k: 8000.0,
            ua_out_w_per_k: CALIBRATED_UA_OUT_W_PER_K,
            ua_inf_w_per_k: 120.0,
            a_sol_m2: CALIBRATED_A_SOL_M2,
            q_max_w: 40_000.0,
            sensible_w_per_person: 100.0,
        }
    }
}

/// Result of [`calibrate`] on `synth_weather(1, Aug 1, Aug 31)`, frozen.
pub const CALIBRATED_A_SOL_M2: f64 = 0.5;
pub const CALIBRATED_UA_OUT_W_PER_K: f64 = 100.0;

impl BuildingConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("floor_area_m2", self.floor_area_m2),
            ("ceiling_height_m", self.ceiling_height_m),
            ("occupant_density_m2_per_person", self.occupant_density_m2_per_person),
            ("lighting_W_per_m2", self.lighting_w_per_m2),
            ("equipment_W_per_m2", self.equipment_w_per_m2),
            ("C_air_J_per_K", self.c_air_j_per_k),
            ("C_env_J_per_K", self.c_env_j_per_k),
            ("UA_in_W_per_K", self.ua_in_w_per_k),
            ("UA_out_W_per_K", self.ua_out_w_per_k),
            ("UA_inf_W_per_K", self.ua_inf_w_per_k),
            ("A_sol_m2", self.a_sol_m2),
            ("sensible_W_per_person", self.sensible_w_per_person),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(SimError::Config(format!("{name} must be positive, got {value}")));
            }
        }
        // A zero-capacity coil is allowed: it reproduces the free-floating building.
        if !(self.q_max_w.is_finite() && self.q_max_w >= 0.0) {
            return Err(SimError::Config(format!(
                "Q_max_W must be non-negative, got {}",
                self.q_max_w
            )));
        }
        Ok(())
    }

    /// Internal gains in watts for the given schedule fractions.
    pub fn internal_gains_w(&self, f: ScheduleFractions) -> f64 {
        let area = self.floor_area_m2;
        area * (self.lighting_w_per_m2 * f.lighting + self.equipment_w_per_m2 * f.equipment)
            + area / self.occupant_density_m2_per_person * self.sensible_w_per_person * f.occupancy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub time: NaiveDateTime,
    pub tout_c: f64,
    pub ghi_wm2: f64,
}

/// Outdoor conditions, linearly interpolated between records.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    records: Vec<WeatherRecord>,
}

impl WeatherSeries {
    pub fn new(records: Vec<WeatherRecord>) -> Result<Self, SimError> {
        if records.is_empty() {
            return Err(SimError::Weather("no records".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if !r.tout_c.is_finite() || !r.ghi_wm2.is_finite() || r.ghi_wm2 < 0.0 {
                return Err(SimError::WeatherRow {
                    row: i + 1,
                    msg: "temperature must be finite and irradiance non-negative".into(),
                });
            }
            if i > 0 {
                let gap = r.time - records[i - 1].time;
                if gap <= Duration::zero() {
                    return Err(SimError::WeatherRow {
                        row: i + 1,
                        msg: format!("timestamp {} is not after the previous one", r.time),
                    });
                }
                if gap > Duration::hours(1) {
                    return Err(SimError::WeatherRow {
                        row: i + 1,
                        msg: "records are more than one hour apart".into(),
                    });
                }
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[WeatherRecord] {
        &self.records
    }

    pub fn start(&self) -> NaiveDateTime {
        self.records[0].time
    }

    pub fn end(&self) -> NaiveDateTime {
        self.records[self.records.len() - 1].time
    }

    /// `(tout_c, ghi_wm2)` at `t`; held constant beyond either end.
    pub fn at(&self, t: NaiveDateTime) -> (f64, f64) {
        let recs = &self.records;
        let idx = recs.partition_point(|r| r.time <= t);
        if idx == 0 {
            return (recs[0].tout_c, recs[0].ghi_wm2);
        }
        if idx == recs.len() {
            let last = recs[recs.len() - 1];
            return (last.tout_c, last.ghi_wm2);
        }
        let (a, b) = (recs[idx - 1], recs[idx]);
        let span = (b.time - a.time).num_seconds() as f64;
        let w = (t - a.time).num_seconds() as f64 / span;
        (
            a.tout_c + w * (b.tout_c - a.tout_c),
            a.ghi_wm2 + w * (b.ghi_wm2 - a.ghi_wm2),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        let mut out = String::from("datetime,tout_c,ghi_wm2\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{}\n",
                r.time.format(ISO_MINUTE),
                r.tout_c,
                r.ghi_wm2
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Deterministic hourly stand-in for a hot-humid August: a diurnal sinusoid
/// with a per-day offset, plus a clear-sky irradiance arc scaled per day.
pub fn synth_weather(seed: u64, start: NaiveDate, end: NaiveDate) -> Result<WeatherSeries, SimError> {
    if start > end {
        return Err(SimError::DateOrder { start, end });
    }
    let mut rng = rng::seeded(seed);
    let days = (end - start).num_days() + 2;
    let mut records = Vec::with_capacity(days as usize * 24);
    for day in 0..days {
        let date = start + Duration::days(day);
        let temp_offset: f64 = rng.random_range(-2.0..=2.0);
        let solar_scale: f64 = rng.random_range(-0.15..=0.15);
        let hours = if day == days - 1 { 1 } else { 24 };
        for h in 0..hours {
            records.push(WeatherRecord {
                time: date.and_hms_opt(h, 0, 0).expect("valid hour"),
                tout_c: synth_tout(h as f64, temp_offset),
                ghi_wm2: synth_ghi(h as f64, solar_scale),
            });
        }
    }
    WeatherSeries::new(records)
}

pub fn synth_tout(hour: f64, day_offset: f64) -> f64 {
    28.5 + 4.5 * (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin() + day_offset
}

pub fn synth_ghi(hour: f64, day_scale: f64) -> f64 {
    (950.0 * (std::f64::consts::PI * (hour - 6.5) / 13.0).sin()).max(0.0) * (1.0 + day_scale)
}

/// Reads `datetime,tout_c,ghi_wm2` CSV with ISO-8601 local timestamps.
pub fn load_weather_csv(path: &Path) -> Result<WeatherSeries, SimError> {
    let text = std::fs::read_to_string(path)?;
    parse_weather_csv(&text)
}

pub fn parse_weather_csv(text: &str) -> Result<WeatherSeries, SimError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SimError::Weather("file is empty".into()))?;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| SimError::Weather(format!("missing column `{name}`")))
    };
    let (i_t, i_tout, i_ghi) = (find("datetime")?, find("tout_c")?, find("ghi_wm2")?);
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| {
            fields.get(i).copied().ok_or_else(|| SimError::WeatherRow {
                row,
                msg: "too few fields".into(),
            })
        };
        let time = parse_timestamp(get(i_t)?).ok_or_else(|| SimError::WeatherRow {
            row,
            msg: format!("unparsable timestamp `{}`", fields[i_t]),
        })?;
        let num = |i: usize, name: &str| -> Result<f64, SimError> {
            get(i)?.parse::<f64>().map_err(|_| SimError::WeatherRow {
                row,
                msg: format!("unparsable {name} `{}`", fields[i]),
            })
        };
        records.push(WeatherRecord {
            time,
            tout_c: num(i_tout, "tout_c")?,
            ghi_wm2: num(i_ghi, "ghi_wm2")?,
        });
    }
    if records.is_empty() {
        return Err(SimError::Weather("no data rows".into()));
    }
    WeatherSeries::new(records)
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFractions {
    pub occupancy: f64,
    pub lighting: f64,
    pub equipment: f64,
}

/// Segment of a daily profile: value ramps linearly from `from` to `to`
/// over `[start_min, end_min)`; constant when they are equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSegment {
    pub start_min: u32,
    pub end_min: u32,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyProfile {
    pub segments: Vec<ProfileSegment>,
    /// Value outside every segment.
    pub default: f64,
}

impl DailyProfile {
    pub fn constant(value: f64) -> Self {
        Self {
            segments: Vec::new(),
            default: value,
        }
    }

    pub fn value_at(&self, minute_of_day: u32) -> f64 {
        for s in &self.segments {
            if minute_of_day >= s.start_min && minute_of_day < s.end_min {
                let w = (minute_of_day - s.start_min) as f64 / (s.end_min - s.start_min) as f64;
                return s.from + w * (s.to - s.from);
            }
        }
        self.default
    }

    fn seg(start_h: f64, end_h: f64, from: f64, to: f64) -> ProfileSegment {
        ProfileSegment {
            start_min: (start_h * 60.0) as u32,
            end_min: (end_h * 60.0) as u32,
            from,
            to,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayProfiles {
    pub occupancy: DailyProfile,
    pub lighting: DailyProfile,
    pub equipment: DailyProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSet {
    pub weekday: DayProfiles,
    pub weekend: DayProfiles,
}

impl Default for ScheduleSet {
    fn default() -> Self {
        let seg = DailyProfile::seg;
        let occupied = |on: f64, off: f64| DailyProfile {
            segments: vec![seg(7.0, 19.0, on, on)],
            default: off,
        };
        Self {
            weekday: DayProfiles {
                occupancy: DailyProfile {
                    segments: vec![
                        seg(7.0, 8.0, 0.0, 0.95),
                        seg(8.0, 12.0, 0.95, 0.95),
                        seg(12.0, 13.0, 0.5, 0.5),
                        seg(13.0, 17.0, 0.95, 0.95),
                        seg(17.0, 19.0, 0.3, 0.3),
                    ],
                    default: 0.0,
                },
                lighting: occupied(0.9, 0.1),
                equipment: occupied(0.9, 0.4),
            },
            weekend: DayProfiles {
                occupancy: DailyProfile::constant(0.0),
                lighting: DailyProfile::constant(0.1),
                equipment: DailyProfile::constant(0.4),
            },
        }
    }
}

pub fn is_weekday(t: NaiveDateTime) -> bool {
    !matches!(t.weekday(), Weekday::Sat | Weekday::Sun)
}

pub fn minute_of_day(t: NaiveDateTime) -> u32 {
    t.hour() * 60 + t.minute()
}

pub fn schedule_at(schedules: &ScheduleSet, t: NaiveDateTime) -> ScheduleFractions {
    let day = if is_weekday(t) {
        &schedules.weekday
    } else {
        &schedules.weekend
    };
    let m = minute_of_day(t);
    ScheduleFractions {
        occupancy: day.occupancy.value_at(m),
        lighting: day.lighting.value_at(m),
        equipment: day.equipment.value_at(m),
    }
}

pub fn cooling_available(t: NaiveDateTime) -> bool {
    (COOLING_START_HOUR..COOLING_END_HOUR).contains(&t.hour())
}

/// Fixed reference schedule: occupied setpoint on weekday cooling hours.
pub fn baseline_setpoint(t: NaiveDateTime) -> f64 {
    if is_weekday(t) && cooling_available(t) {
        BASELINE_OCCUPIED_SETPOINT_C
    } else {
        BASELINE_UNOCCUPIED_SETPOINT_C
    }
}

pub fn clamp_setpoint(setpoint_c: f64) -> f64 {
    setpoint_c.clamp(SETPOINT_MIN_C, SETPOINT_MAX_C)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildingState {
    pub time: NaiveDateTime,
    pub t_air_c: f64,
    pub t_env_c: f64,
    pub setpoint_c: f64,
    /// Mean coil cooling rate over the last control interval.
    pub last_interval_cooling_w: f64,
}

impl BuildingState {
    pub fn at_equilibrium(time: NaiveDateTime, temp_c: f64) -> Self {
        Self {
            time,
            t_air_c: temp_c,
            t_env_c: temp_c,
            setpoint_c: baseline_setpoint(time),
            last_interval_cooling_w: 0.0,
        }
    }
}

/// Power terms of one substep, all in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubstepFlows {
    pub envelope_to_air_w: f64,
    pub infiltration_w: f64,
    pub internal_w: f64,
    pub cooling_w: f64,
}

/// The simulator: parameters plus boundary conditions.
#[derive(Debug, Clone)]
pub struct Building {
    pub config: BuildingConfig,
    pub weather: WeatherSeries,
    pub schedules: ScheduleSet,
}

impl Building {
    pub fn new(
        config: BuildingConfig,
        weather: WeatherSeries,
        schedules: ScheduleSet,
    ) -> Result<Self, SimError> {
        config.validate()?;
        Ok(Self {
            config,
            weather,
            schedules,
        })
    }

    /// One explicit-Euler substep of `dt` seconds; mutates `state` and
    /// returns the power terms that drove the air node.
    pub fn substep(&self, state: &mut BuildingState, dt: f64) -> SubstepFlows {
        let cfg = &self.config;
        let t = state.time;
        let (tout, ghi) = self.weather.at(t);
        let q_int = cfg.internal_gains_w(schedule_at(&self.schedules, t));

        let env_to_air = cfg.ua_in_w_per_k * (state.t_env_c - state.t_air_c);
        let infiltration = cfg.ua_inf_w_per_k * (tout - state.t_air_c);
        let env_net = cfg.ua_out_w_per_k * (tout - state.t_env_c) - env_to_air + cfg.a_sol_m2 * ghi;

        state.t_env_c += dt * env_net / cfg.c_env_j_per_k;
        state.t_air_c += dt * (env_to_air + infiltration + q_int) / cfg.c_air_j_per_k;

        let mut cooling = 0.0;
        if cooling_available(t) && state.t_air_c > state.setpoint_c {
            cooling = (cfg.c_air_j_per_k * (state.t_air_c - state.setpoint_c) / dt).min(cfg.q_max_w);
            state.t_air_c -= cooling * dt / cfg.c_air_j_per_k;
        }
        state.time = t + Duration::seconds(dt as i64);
        SubstepFlows {
            envelope_to_air_w: env_to_air,
            infiltration_w: infiltration,
            internal_w: q_int,
            cooling_w: cooling,
        }
    }

    /// Advances one 10-minute control interval holding `setpoint_c`.
    /// Returns the next state and the interval-mean cooling rate.
    pub fn step(&self, state: &BuildingState, setpoint_c: f64) -> Result<(BuildingState, f64), SimError> {
        let mut next = *state;
        next.setpoint_c = setpoint_c;
        let substeps = CONTROL_INTERVAL_S / SUBSTEP_S;
        let mut total = 0.0;
        for _ in 0..substeps {
            total += self.substep(&mut next, SUBSTEP_S as f64).cooling_w;
        }
        if !(next.t_air_c.is_finite() && next.t_env_c.is_finite()) {
            return Err(SimError::NonFinite {
                time: next.time,
                t_air: next.t_air_c,
                t_env: next.t_env_c,
            });
        }
        let mean = total / substeps as f64;
        next.last_interval_cooling_w = mean;
        Ok((next, mean))
    }

    /// Initial state at `start`, in equilibrium with the outdoor mean of the
    /// first day.
    pub fn initial_state(&self, start: NaiveDateTime) -> BuildingState {
        let first_day: Vec<f64> = (0..24)
            .map(|h| self.weather.at(start + Duration::hours(h)).0)
            .collect();
        let mean = first_day.iter().sum::<f64>() / first_day.len() as f64;
        BuildingState::at_equilibrium(start, mean)
    }

    /// Simulates `period` under the fixed baseline setpoint schedule.
    pub fn run_baseline(&self, period: Period) -> Result<BaselineSeries, SimError> {
        self.run_schedule(period, baseline_setpoint)
    }

    /// Simulates `period` with the setpoint given by `setpoint_at` for each interval.
    pub fn run_schedule(
        &self,
        period: Period,
        mut setpoint_at: impl FnMut(NaiveDateTime) -> f64,
    ) -> Result<BaselineSeries, SimError> {
        let start = period.start_time();
        let n = period.intervals();
        let mut state = self.initial_state(start);
        let mut states = Vec::with_capacity(n);
        let mut cooling = Vec::with_capacity(n);
        for _ in 0..n {
            states.push(state);
            let (next, q) = self.step(&state, setpoint_at(state.time))?;
            cooling.push(q);
            state = next;
        }
        Ok(BaselineSeries {
            start,
            cooling_w: cooling,
            states,
        })
    }
}

/// Inclusive range of simulated calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Period {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, SimError> {
        if start > end {
            return Err(SimError::DateOrder { start, end });
        }
        Ok(Self { start, end })
    }

    /// August 1-31 of the default simulation year.
    pub fn august() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2023, 8, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2023, 8, 31).expect("valid date"),
        }
    }

    pub fn start_time(&self) -> NaiveDateTime {
        self.start.and_time(NaiveTime::MIN)
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.start.iter_days().take_while(move |d| *d <= self.end)
    }

    pub fn weekdays(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.days().filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
    }

    pub fn intervals(&self) -> usize {
        let days = (self.end - self.start).num_days() as usize + 1;
        days * 24 * 3600 / CONTROL_INTERVAL_S as usize
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..={}", self.start, self.end)
    }
}

/// Per-interval cooling of a simulated period, plus the state at the start
/// of every interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSeries {
    pub start: NaiveDateTime,
    pub cooling_w: Vec<f64>,
    pub states: Vec<BuildingState>,
}

impl BaselineSeries {
    pub fn index_of(&self, t: NaiveDateTime) -> Option<usize> {
        let secs = (t - self.start).num_seconds();
        if secs < 0 || secs % CONTROL_INTERVAL_S != 0 {
            return None;
        }
        let idx = (secs / CONTROL_INTERVAL_S) as usize;
        (idx < self.cooling_w.len()).then_some(idx)
    }

    pub fn time_of(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::seconds(index as i64 * CONTROL_INTERVAL_S)
    }

    /// Hourly mean cooling rate for each hour of the series.
    pub fn hourly_means(&self) -> Vec<(NaiveDateTime, f64)> {
        let per_hour = (3600 / CONTROL_INTERVAL_S) as usize;
        self.cooling_w
            .chunks(per_hour)
            .enumerate()
            .map(|(h, c)| (self.time_of(h * per_hour), c.iter().sum::<f64>() / c.len() as f64))
            .collect()
    }

    /// Summary over weekday intervals starting in `[from_hour, to_hour)`.
    pub fn window_stats(&self, from_hour: u32, to_hour: u32) -> WindowStats {
        let mut values = Vec::new();
        let mut by_hour: Vec<Vec<f64>> = vec![Vec::new(); 24];
        for (h, mean) in self.hourly_means() {
            if is_weekday(h) && (from_hour..to_hour).contains(&h.hour()) {
                values.push(mean);
                by_hour[h.hour() as usize].push(mean);
            }
        }
        let per_hour_std: Vec<f64> = by_hour
            .iter()
            .filter(|v| v.len() > 1)
            .map(|v| std_dev(v))
            .collect();
        WindowStats {
            mean_w: mean(&values),
            std_w: std_dev(&values),
            mean_per_hour_std_w: mean(&per_hour_std),
            samples: values.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub mean_w: f64,
    pub std_w: f64,
    /// Across-day standard deviation of each hour-of-day, averaged over hours.
    pub mean_per_hour_std_w: f64,
    pub samples: usize,
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub(crate) fn std_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Working-hours window used for calibration.
pub const WORKING_HOURS: (u32, u32) = (8, 16);
pub const CALIBRATION_TARGET_W: f64 = 17_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub a_sol_m2: f64,
    pub ua_out_w_per_k: f64,
    pub stats: WindowStats,
}

/// Lower bound on the across-day spread a calibrated baseline must keep.
pub const CALIBRATION_MIN_HOURLY_STD_W: f64 = 1_000.0;
pub const CALIBRATION_A_SOL_GRID: [f64; 9] = [0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 15.0];
pub const CALIBRATION_UA_OUT_GRID: [f64; 7] = [100.0, 150.0, 200.0, 300.0, 400.0, 600.0, 800.0];

/// Grid search over solar aperture and envelope conductance for the pair
/// whose working-hours mean baseline cooling is closest to `target_w`,
/// among pairs whose mean per-hour across-day std is at least
/// `min_hourly_std_w`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate(
    base: BuildingConfig,
    weather: &WeatherSeries,
    schedules: &ScheduleSet,
    period: Period,
    a_sol_grid: &[f64],
    ua_out_grid: &[f64],
    target_w: f64,
    min_hourly_std_w: f64,
) -> Result<CalibrationPoint, SimError> {
    let mut best: Option<CalibrationPoint> = None;
    for &a_sol in a_sol_grid {
        for &ua_out in ua_out_grid {
            let cfg = BuildingConfig {
                a_sol_m2: a_sol,
                ua_out_w_per_k: ua_out,
                ..base
            };
            let building = Building::new(cfg, weather.clone(), schedules.clone())?;
            let stats = building
                .run_baseline(period)?
                .window_stats(WORKING_HOURS.0, WORKING_HOURS.1);
            if stats.mean_per_hour_std_w < min_hourly_std_w {
                continue;
            }
            let better = best.is_none_or(|b| {
                (stats.mean_w - target_w).abs() < (b.stats.mean_w - target_w).abs()
            });
            if better {
                best = Some(CalibrationPoint {
                    a_sol_m2: a_sol,
                    ua_out_w_per_k: ua_out,
                    stats,
                });
            }
        }
    }
    best.ok_or_else(|| SimError::Config("no calibration grid point meets the spread bound".into()))
}
