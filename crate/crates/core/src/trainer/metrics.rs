//! Per-step records of a control run and the statistics reported over them.

use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::building::WORKING_HOURS;

/// One control step: the state the agent saw, what it did, and the outcome
/// over the following interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Start of the control interval.
    pub time: NaiveDateTime,
    pub episode: usize,
    pub step: usize,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    /// Discrete index or continuous delta.
    pub action: f64,
    /// Setpoint held over the interval.
    pub setpoint_c: f64,
    pub cooling_w: f64,
    pub baseline_cooling_w: f64,
    pub signal: f64,
    pub k_target: f64,
    pub reward: f64,
    pub valid: bool,
    /// Achieved minus target reduction; 0 on invalid steps.
    pub control_error: f64,
}

/// Order statistics of signed control errors plus tolerance fractions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
    pub median_abs: f64,
    pub frac_within_5: f64,
    pub frac_within_10: f64,
}

impl ErrorStats {
    pub fn from_errors(errors: &[f64]) -> Self {
        if errors.is_empty() {
            return Self::default();
        }
        let mut sorted = errors.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let n = errors.len() as f64;
        let within = |tol: f64| errors.iter().filter(|e| e.abs() < tol).count() as f64 / n;
        Self {
            count: errors.len(),
            median: quantile(&sorted, 0.5),
            mean: errors.iter().sum::<f64>() / n,
            p10: quantile(&sorted, 0.1),
            p90: quantile(&sorted, 0.9),
            median_abs: quantile(&abs, 0.5),
            frac_within_5: within(0.05),
            frac_within_10: within(0.10),
        }
    }
}

/// Linear interpolation between closest ranks of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Across-day spread of hourly cooling during working hours.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpreadComparison {
    /// Mean over working hours of the across-day std of the agent's hourly cooling.
    pub agent_std_w: f64,
    pub baseline_std_w: f64,
    /// `1 - agent / baseline`.
    pub reduction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalGroupStats {
    pub signal: f64,
    pub k_target: f64,
    pub errors: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub steps: usize,
    pub valid_steps: usize,
    pub mean_episode_reward: f64,
    /// Per control interval.
    pub errors: ErrorStats,
    /// On hourly totals of actual and baseline cooling.
    pub hourly_errors: ErrorStats,
    pub spread: SpreadComparison,
    pub by_signal: Vec<SignalGroupStats>,
}

impl MetricsSummary {
    pub fn from_records(records: &[EpisodeRecord]) -> Self {
        let valid: Vec<&EpisodeRecord> = records.iter().filter(|r| r.valid).collect();
        let errors: Vec<f64> = valid.iter().map(|r| r.control_error).collect();

        let mut episode_rewards: BTreeMap<usize, f64> = BTreeMap::new();
        for r in records {
            *episode_rewards.entry(r.episode).or_default() += r.reward;
        }
        let mean_episode_reward = if episode_rewards.is_empty() {
            0.0
        } else {
            episode_rewards.values().sum::<f64>() / episode_rewards.len() as f64
        };

        // Hourly totals: (day, hour) -> (actual, baseline, target-weighted baseline).
        let mut hours: BTreeMap<(NaiveDate, u32), (f64, f64, f64)> = BTreeMap::new();
        for r in &valid {
            let e = hours.entry((r.time.date(), r.time.hour())).or_default();
            e.0 += r.cooling_w;
            e.1 += r.baseline_cooling_w;
            e.2 += r.k_target * r.baseline_cooling_w;
        }
        let hourly: Vec<f64> = hours
            .values()
            .map(|&(act, base, kb)| (base - act) / base - kb / base)
            .collect();

        let mut groups: BTreeMap<u64, (f64, f64, Vec<f64>)> = BTreeMap::new();
        for r in &valid {
            groups
                .entry(r.signal.to_bits())
                .or_insert_with(|| (r.signal, r.k_target, Vec::new()))
                .2
                .push(r.control_error);
        }
        let mut by_signal: Vec<SignalGroupStats> = groups
            .into_values()
            .map(|(signal, k_target, errs)| SignalGroupStats {
                signal,
                k_target,
                errors: ErrorStats::from_errors(&errs),
            })
            .collect();
        by_signal.sort_by(|a, b| a.signal.total_cmp(&b.signal));

        Self {
            episodes: episode_rewards.len(),
            steps: records.len(),
            valid_steps: valid.len(),
            mean_episode_reward,
            errors: ErrorStats::from_errors(&errors),
            hourly_errors: ErrorStats::from_errors(&hourly),
            spread: spread(records),
            by_signal,
        }
    }
}

/// Per-hour-of-day profile of the run, as written by the report command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourProfile {
    pub hour: u32,
    pub days: usize,
    pub cooling_mean_w: f64,
    pub cooling_std_w: f64,
    pub baseline_mean_w: f64,
    pub baseline_std_w: f64,
    pub target_mean_w: f64,
}

fn hourly_by_day(records: &[EpisodeRecord]) -> BTreeMap<u32, Vec<(f64, f64, f64)>> {
    let mut sums: BTreeMap<(u32, NaiveDate), (f64, f64, f64, usize)> = BTreeMap::new();
    for r in records {
        let e = sums.entry((r.time.hour(), r.time.date())).or_default();
        e.0 += r.cooling_w;
        e.1 += r.baseline_cooling_w;
        e.2 += (1.0 - r.k_target) * r.baseline_cooling_w;
        e.3 += 1;
    }
    let mut out: BTreeMap<u32, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for ((hour, _), (a, b, t, n)) in sums {
        let n = n as f64;
        out.entry(hour).or_default().push((a / n, b / n, t / n));
    }
    out
}

pub fn hour_profile(records: &[EpisodeRecord]) -> Vec<HourProfile> {
    hourly_by_day(records)
        .into_iter()
        .map(|(hour, days)| {
            let col = |f: fn(&(f64, f64, f64)) -> f64| days.iter().map(f).collect::<Vec<f64>>();
            let (act, base, target) = (col(|d| d.0), col(|d| d.1), col(|d| d.2));
            HourProfile {
                hour,
                days: days.len(),
                cooling_mean_w: mean(&act),
                cooling_std_w: std_dev(&act),
                baseline_mean_w: mean(&base),
                baseline_std_w: std_dev(&base),
                target_mean_w: mean(&target),
            }
        })
        .collect()
}

fn spread(records: &[EpisodeRecord]) -> SpreadComparison {
    let profile: Vec<HourProfile> = hour_profile(records)
        .into_iter()
        .filter(|p| (WORKING_HOURS.0..WORKING_HOURS.1).contains(&p.hour))
        .collect();
    if profile.is_empty() {
        return SpreadComparison::default();
    }
    let agent = mean(&profile.iter().map(|p| p.cooling_std_w).collect::<Vec<_>>());
    let base = mean(&profile.iter().map(|p| p.baseline_std_w).collect::<Vec<_>>());
    SpreadComparison {
        agent_std_w: agent,
        baseline_std_w: base,
        reduction: if base > 0.0 { 1.0 - agent / base } else { 0.0 },
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}
