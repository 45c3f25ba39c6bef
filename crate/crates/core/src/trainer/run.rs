//! Files a run leaves in its output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::metrics::{hour_profile, EpisodeRecord, MetricsSummary};
use super::records::{fmt_f64, read_timeseries_csv, write_timeseries_csv};
use super::{train, AgentArtifact, RunConfig, RunEnvs, TrainError, TrainLogRow, TrainOutcome};

pub const AGENT_FILE: &str = "agent.best";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const EVAL_FILE: &str = "eval_timeseries.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFIG_FILE: &str = "config.resolved";
pub const PROFILE_FILE: &str = "hourly_profile.csv";

const TRAIN_LOG_HEADER: &str = "epoch,train_mean_episode_reward,eval_mean_episode_reward,eval_median_abs_error,eval_frac_within_10,actor_loss,critic_loss,clip_fraction,updates,best";

fn log_line(r: &TrainLogRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.epoch,
        fmt_f64(r.train_mean_episode_reward),
        fmt_f64(r.eval_mean_episode_reward),
        fmt_f64(r.eval_median_abs_error),
        fmt_f64(r.eval_frac_within_10),
        fmt_f64(r.actor_loss),
        fmt_f64(r.critic_loss),
        fmt_f64(r.clip_fraction),
        r.updates,
        r.best
    )
}

fn create_dir(dir: &Path) -> Result<(), TrainError> {
    fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), TrainError> {
    fs::write(path, text).map_err(|e| TrainError::io(path, e))
}

pub fn write_metrics(path: &Path, metrics: &MetricsSummary) -> Result<(), TrainError> {
    let text = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    write_file(path, &text)
}

/// Trains and writes the five run files into `dir`. The training log is
/// flushed after every epoch, so an aborted run keeps its progress.
pub fn train_to_dir(cfg: &RunConfig, envs: &mut RunEnvs, dir: &Path) -> Result<TrainOutcome, TrainError> {
    create_dir(dir)?;
    write_file(&dir.join(CONFIG_FILE), &cfg.resolved().to_toml()?)?;
    let log_path = dir.join(TRAIN_LOG_FILE);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| TrainError::io(&log_path, e))?);
    writeln!(log, "{TRAIN_LOG_HEADER}")
        .and_then(|_| log.flush())
        .map_err(|e| TrainError::io(&log_path, e))?;
    let outcome = train(cfg, envs, &mut |row| {
        writeln!(log, "{}", log_line(row))
            .and_then(|_| log.flush())
            .map_err(|e| TrainError::io(&log_path, e))
    })?;
    drop(log);
    outcome.agent.save(&dir.join(AGENT_FILE))?;
    write_eval_outputs(dir, &cfg.task_spec().observation.names(), &outcome.eval_records, &outcome.metrics)?;
    Ok(outcome)
}

/// Writes `eval_timeseries.csv` and `metrics.json`.
pub fn write_eval_outputs(
    dir: &Path,
    features: &[String],
    records: &[EpisodeRecord],
    metrics: &MetricsSummary,
) -> Result<(), TrainError> {
    create_dir(dir)?;
    write_timeseries_csv(&dir.join(EVAL_FILE), features, records)?;
    write_metrics(&dir.join(METRICS_FILE), metrics)
}

pub fn load_agent(path: &Path) -> Result<AgentArtifact, TrainError> {
    AgentArtifact::load(path)
}

/// Report over a run directory (or a time-series file): the summary
/// statistics and the per-hour profile written next to the input.
pub struct Report {
    pub metrics: MetricsSummary,
    pub profile_path: std::path::PathBuf,
}

pub fn report(input: &Path) -> Result<Report, TrainError> {
    let (series, dir) = if input.is_dir() {
        (input.join(EVAL_FILE), input.to_path_buf())
    } else {
        (input.to_path_buf(), input.parent().unwrap_or(Path::new(".")).to_path_buf())
    };
    let (_, records) = read_timeseries_csv(&series)?;
    let metrics = MetricsSummary::from_records(&records);
    let profile_path = dir.join(PROFILE_FILE);
    let mut text = String::from("hour,days,cooling_mean_w,cooling_std_w,baseline_mean_w,baseline_std_w,target_mean_w\n");
    for p in hour_profile(&records) {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.hour,
            p.days,
            fmt_f64(p.cooling_mean_w),
            fmt_f64(p.cooling_std_w),
            fmt_f64(p.baseline_mean_w),
            fmt_f64(p.baseline_std_w),
            fmt_f64(p.target_mean_w)
        ));
    }
    write_file(&profile_path, &text)?;
    Ok(Report { metrics, profile_path })
}

/// Human-readable lines for a metrics summary.
pub fn format_metrics(m: &MetricsSummary) -> String {
    let pct = |v: f64| 100.0 * v;
    let mut lines = vec![
        format!("episodes: {}  steps: {}  valid steps: {}", m.episodes, m.steps, m.valid_steps),
        format!("mean episode reward: {:.4}", m.mean_episode_reward),
        format!(
            "control error: median {:+.2}%  mean {:+.2}%  p10 {:+.2}%  p90 {:+.2}%",
            pct(m.errors.median),
            pct(m.errors.mean),
            pct(m.errors.p10),
            pct(m.errors.p90)
        ),
        format!("median |error|: {:.2}%", pct(m.errors.median_abs)),
        format!("%<5: {:.1}%", pct(m.errors.frac_within_5)),
        format!("%<10: {:.1}%", pct(m.errors.frac_within_10)),
        format!(
            "hourly: median |error| {:.2}%  %<5 {:.1}%  %<10 {:.1}%",
            pct(m.hourly_errors.median_abs),
            pct(m.hourly_errors.frac_within_5),
            pct(m.hourly_errors.frac_within_10)
        ),
        format!(
            "working-hours std: agent {:.0} W  baseline {:.0} W  reduction {:.1}%",
            m.spread.agent_std_w,
            m.spread.baseline_std_w,
            pct(m.spread.reduction)
        ),
    ];
    for g in &m.by_signal {
        lines.push(format!(
            "signal {} (k={}): steps {}  median |error| {:.2}%  %<10 {:.1}%",
            g.signal,
            g.k_target,
            g.errors.count,
            pct(g.errors.median_abs),
            pct(g.errors.frac_within_10)
        ));
    }
    lines.join("\n")
}
