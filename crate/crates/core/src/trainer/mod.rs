//! Episode orchestration: training with best-agent checkpointing,
//! deterministic evaluation, and the files a run leaves behind.
//!
//! An episode is one weekday controlled from 08:00 to 19:00 in 10-minute
//! steps. Each epoch trains over the period's weekdays in calendar order and
//! then evaluates the greedy policy on the same days; the agent with the best
//! mean eval episode reward is kept.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{self, AlgoError, Decision, Experience, Learner, Mode, Policy, UpdateStats};
use crate::building::{Period, SimError, BASELINE_OCCUPIED_SETPOINT_C};
use crate::env::{BaselineCache, BuiltinEnv, EnvError, EnvSpec, Environment, EpisodeWindow};
use crate::problem::{self, Action, ProblemError, TaskSpec};
use crate::rng::{self, Rng};

pub mod artifact;
pub mod config;
pub mod metrics;
pub mod records;
pub mod run;
pub mod sweep;

pub use artifact::{AgentArtifact, TrainingMetadata};
pub use config::{EnvSource, RunConfig, WeatherSource};
pub use metrics::{EpisodeRecord, MetricsSummary};

/// First and last control instants of an episode day.
pub const EPISODE_START_HOUR: u32 = 8;
pub const EPISODE_END_HOUR: u32 = 19;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config error: {0}")]
    Config(String),
    #[error("environment failure: {0}")]
    Env(#[from] EnvError),
    #[error(transparent)]
    Algo(#[from] AlgoError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("agent file error: {0}")]
    Artifact(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl TrainError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        TrainError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Whether the failure lies in the inputs rather than at runtime.
    pub fn is_config(&self) -> bool {
        matches!(self, TrainError::Config(_) | TrainError::Algo(AlgoError::Config(_)))
    }
}

/// One weekday's control window.
pub fn episode_window(day: NaiveDate, seed: u64) -> EpisodeWindow {
    EpisodeWindow {
        seed,
        start: day.and_hms_opt(EPISODE_START_HOUR, 0, 0).expect("valid hour"),
        end: day.and_hms_opt(EPISODE_END_HOUR, 0, 0).expect("valid hour"),
    }
}

pub fn episode_days(period: Period) -> Vec<NaiveDate> {
    period.weekdays().collect()
}

/// Fails unless the environment reports exactly the task's features and
/// action space.
pub fn check_env_spec(env: &EnvSpec, task: &TaskSpec) -> Result<(), TrainError> {
    let expected = task.observation.names();
    if env.features != expected {
        return Err(EnvError::SpecMismatch(format!(
            "environment reports {} features {:?}, task expects {} {:?}",
            env.features.len(),
            env.features,
            expected.len(),
            expected
        ))
        .into());
    }
    if env.action != task.action {
        return Err(EnvError::SpecMismatch(format!(
            "environment action space {:?} differs from the task's {:?}",
            env.action, task.action
        ))
        .into());
    }
    Ok(())
}

/// Who picks actions during an episode.
pub enum Actor<'a> {
    Train(&'a mut dyn Learner),
    Eval(&'a Policy),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpisodeOutcome {
    pub reward: f64,
    pub steps: usize,
    pub updates: UpdateStats,
}

/// Runs one episode, appending a record per control step to `records`.
/// Records of a failed episode are kept up to the failing step.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    env: &mut dyn Environment,
    task: &TaskSpec,
    mut actor: Actor<'_>,
    window: &EpisodeWindow,
    episode: usize,
    rng: &mut Rng,
    records: &mut Vec<EpisodeRecord>,
) -> Result<EpisodeOutcome, TrainError> {
    let mut obs = env.reset(window)?;
    let mut state = task.observation.normalize(&obs.features)?;
    let mut setpoint = BASELINE_OCCUPIED_SETPOINT_C;
    let mut outcome = EpisodeOutcome::default();
    for step in 0.. {
        if obs.done {
            break;
        }
        let decision = match &mut actor {
            Actor::Train(learner) => learner.act(&state, rng, Mode::Train)?,
            Actor::Eval(policy) => Decision::plain(policy.act(&state)?),
        };
        let next = env.step(decision.action)?;
        setpoint = problem::apply_action(setpoint, decision.action, &task.action)?;
        let k_target = task.k_target_at(obs.time);
        let scored = problem::reward(next.baseline_w, next.cooling_w, k_target, &task.reward)?;
        let next_state = task.observation.normalize(&next.features)?;
        records.push(EpisodeRecord {
            time: obs.time,
            episode,
            step,
            raw: obs.features,
            normalized: state.clone(),
            action: decision.action.value(),
            setpoint_c: setpoint,
            cooling_w: next.cooling_w,
            baseline_cooling_w: next.baseline_w,
            signal: task.signal_at(obs.time).unwrap_or(0.0),
            k_target,
            reward: scored.reward,
            valid: scored.valid,
            control_error: scored.control_error,
        });
        if let Actor::Train(learner) = &mut actor {
            let experience = Experience {
                obs: std::mem::take(&mut state),
                action: decision.action,
                reward: scored.reward,
                next_obs: next_state.clone(),
                done: next.done,
            };
            if let Some(stats) = learner.observe(experience, &decision, scored.valid, rng)? {
                outcome.updates = outcome.updates.merge(stats);
            }
        }
        outcome.reward += scored.reward;
        outcome.steps += 1;
        obs = next;
        state = next_state;
    }
    Ok(outcome)
}

/// Greedy pass over every weekday of the period.
pub fn evaluate_policy(
    env: &mut dyn Environment,
    task: &TaskSpec,
    policy: &Policy,
    days: &[NaiveDate],
    seed: u64,
) -> Result<(Vec<EpisodeRecord>, MetricsSummary), TrainError> {
    let mut records = Vec::new();
    // Greedy policies never draw; the generator only satisfies the signature.
    let mut rng = rng::seeded(seed);
    for (i, &day) in days.iter().enumerate() {
        run_episode(env, task, Actor::Eval(policy), &episode_window(day, seed), i, &mut rng, &mut records)?;
    }
    let summary = MetricsSummary::from_records(&records);
    Ok((records, summary))
}

/// Evaluates a saved agent under `cfg`.
pub fn evaluate(
    agent: &AgentArtifact,
    cfg: &RunConfig,
    env: &mut dyn Environment,
) -> Result<(Vec<EpisodeRecord>, MetricsSummary), TrainError> {
    let task = cfg.task_spec();
    agent.check_compatible(&task.observation, &task.action)?;
    check_env_spec(&env.spec(), &task)?;
    let policy = agent.policy()?;
    evaluate_policy(env, &task, &policy, &episode_days(cfg.period()?), cfg.run.seed)
}

/// One row of `train_log.csv`. Epoch 0 is the untrained agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub epoch: usize,
    /// Mean reward of this epoch's training episodes (0 at epoch 0).
    pub train_mean_episode_reward: f64,
    pub eval_mean_episode_reward: f64,
    pub eval_median_abs_error: f64,
    pub eval_frac_within_10: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub clip_fraction: f64,
    pub updates: u64,
    /// Whether this eval pass set a new best and was checkpointed.
    pub best: bool,
}

pub struct TrainOutcome {
    pub agent: AgentArtifact,
    pub log: Vec<TrainLogRow>,
    /// Eval records of the kept agent.
    pub eval_records: Vec<EpisodeRecord>,
    pub metrics: MetricsSummary,
}

/// Environments for one run: training, and evaluation when it differs.
pub struct RunEnvs {
    pub train: Box<dyn Environment>,
    pub eval: Option<Box<dyn Environment>>,
}

/// Opens the builtin simulator or connects to the configured server.
pub fn open_envs(cfg: &RunConfig, cache: &BaselineCache) -> Result<RunEnvs, TrainError> {
    match &cfg.run.env {
        EnvSource::Builtin => {
            let period = cfg.period()?;
            let task = cfg.task_spec();
            let train: Box<dyn Environment> =
                Box::new(BuiltinEnv::new(cfg.building(false)?, task.clone(), period, cache)?);
            let eval: Option<Box<dyn Environment>> = match cfg.run.eval_weather_seed {
                Some(_) => Some(Box::new(BuiltinEnv::new(cfg.building(true)?, task, period, cache)?)),
                None => None,
            };
            Ok(RunEnvs { train, eval })
        }
        EnvSource::Remote(endpoint) => {
            let timeout = std::time::Duration::from_secs_f64(cfg.run.remote_timeout_s);
            let remote = crate::cosim::RemoteEnv::connect(endpoint, timeout)?;
            Ok(RunEnvs {
                train: Box::new(remote),
                eval: None,
            })
        }
    }
}

/// Trains per `cfg`. `on_epoch` sees each log row as soon as it exists, so
/// a caller can persist progress before a later failure.
pub fn train(
    cfg: &RunConfig,
    envs: &mut RunEnvs,
    on_epoch: &mut dyn FnMut(&TrainLogRow) -> Result<(), TrainError>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let task = cfg.task_spec();
    check_env_spec(&envs.train.spec(), &task)?;
    if let Some(eval) = &envs.eval {
        check_env_spec(&eval.spec(), &task)?;
    }
    let days = episode_days(cfg.period()?);
    if days.is_empty() {
        return Err(TrainError::Config("the period contains no weekday".into()));
    }
    let hp = &cfg.algorithm.hyperparams;
    let seed = cfg.run.seed;
    let mut rng = rng::seeded(seed);
    let mut learner = algorithms::build_learner(cfg.algorithm.name, task.observation.len(), hp, rng.random())?;

    let snapshot = |learner: &dyn Learner, reward: f64, epoch: usize| {
        AgentArtifact::from_learner(
            learner,
            task.task,
            task.observation.clone(),
            task.action,
            hp.clone(),
            TrainingMetadata {
                seed,
                best_mean_episode_reward: reward,
                epoch,
                config_digest: cfg.digest(),
            },
        )
    };

    let mut log = Vec::new();
    let mut best: Option<(AgentArtifact, Vec<EpisodeRecord>, MetricsSummary)> = None;
    for epoch in 0..=cfg.epochs() {
        let mut row = TrainLogRow {
            epoch,
            train_mean_episode_reward: 0.0,
            eval_mean_episode_reward: 0.0,
            eval_median_abs_error: 0.0,
            eval_frac_within_10: 0.0,
            actor_loss: 0.0,
            critic_loss: 0.0,
            clip_fraction: 0.0,
            updates: 0,
            best: false,
        };
        if epoch > 0 {
            let mut total = 0.0;
            let mut stats = UpdateStats::default();
            let mut scratch = Vec::new();
            for (i, &day) in days.iter().enumerate() {
                scratch.clear();
                let window = episode_window(day, seed);
                let out = run_episode(
                    envs.train.as_mut(),
                    &task,
                    Actor::Train(learner.as_mut()),
                    &window,
                    i,
                    &mut rng,
                    &mut scratch,
                )?;
                total += out.reward;
                stats = stats.merge(out.updates);
            }
            row.train_mean_episode_reward = total / days.len() as f64;
            row.actor_loss = stats.actor_loss;
            row.critic_loss = stats.critic_loss;
            row.clip_fraction = stats.clip_fraction;
            row.updates = stats.updates;
        }
        let policy = learner.policy();
        let eval_env = envs.eval.as_mut().unwrap_or(&mut envs.train);
        let (records, summary) = evaluate_policy(eval_env.as_mut(), &task, &policy, &days, seed)?;
        row.eval_mean_episode_reward = summary.mean_episode_reward;
        row.eval_median_abs_error = summary.errors.median_abs;
        row.eval_frac_within_10 = summary.errors.frac_within_10;
        let improved = best
            .as_ref()
            .is_none_or(|(a, _, _)| summary.mean_episode_reward > a.metadata.best_mean_episode_reward);
        if improved {
            row.best = true;
            best = Some((snapshot(learner.as_ref(), summary.mean_episode_reward, epoch), records, summary));
        }
        on_epoch(&row)?;
        log.push(row);
    }
    let (agent, eval_records, metrics) = best.expect("at least one eval pass");
    Ok(TrainOutcome {
        agent,
        log,
        eval_records,
        metrics,
    })
}

/// The action that keeps the setpoint where it is.
pub fn hold_action(task: &TaskSpec) -> Action {
    match task.action.kind {
        problem::ActionKind::DiscreteDelta => Action::Discrete(1),
        problem::ActionKind::ContinuousDelta => Action::Continuous(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::Algorithm;
    use crate::problem::Task;

    fn small(task: Task, algorithm: Algorithm) -> RunConfig {
        let mut cfg = RunConfig::new(task, algorithm);
        cfg.building.period_start = NaiveDate::from_ymd_opt(2023, 8, 1).unwrap();
        cfg.building.period_end = NaiveDate::from_ymd_opt(2023, 8, 3).unwrap();
        cfg.algorithm.hyperparams.hidden = vec![8];
        cfg.algorithm.hyperparams.batch_size = 16;
        cfg.algorithm.hyperparams.rollout_episodes = 2;
        cfg.run.epochs = Some(2);
        cfg
    }

    fn train_quiet(cfg: &RunConfig) -> TrainOutcome {
        let mut envs = open_envs(cfg, BaselineCache::shared()).unwrap();
        train(cfg, &mut envs, &mut |_| Ok(())).unwrap()
    }

    #[test]
    fn episodes_have_sixty_six_steps() {
        let cfg = small(Task::Constant, Algorithm::Dqn);
        let out = train_quiet(&cfg);
        assert_eq!(out.eval_records.len(), 3 * 66);
        assert_eq!(out.log.len(), 3);
        assert_eq!(out.log[0].updates, 0);
        assert!(out.log[1].updates > 0);
    }

    #[test]
    fn zero_epochs_returns_the_initial_agent() {
        let mut cfg = small(Task::Dynamic, Algorithm::Ppo);
        cfg.run.epochs = Some(0);
        let out = train_quiet(&cfg);
        assert_eq!(out.log.len(), 1);
        assert_eq!(out.agent.metadata.epoch, 0);
        let fresh = algorithms::build_learner(
            Algorithm::Ppo,
            7,
            &cfg.algorithm.hyperparams,
            rng::seeded(cfg.run.seed).random(),
        )
        .unwrap();
        let nets = out.agent.decode_networks().unwrap();
        assert_eq!(nets[0].params.flat_params(), fresh.networks()[0].params.flat_params());
    }

    #[test]
    fn checkpoint_keeps_the_best_eval_pass() {
        let cfg = small(Task::Constant, Algorithm::Pg);
        let out = train_quiet(&cfg);
        let max = out
            .log
            .iter()
            .map(|r| r.eval_mean_episode_reward)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.agent.metadata.best_mean_episode_reward, max);
        assert_eq!(out.metrics.mean_episode_reward, max);
    }

    #[test]
    fn evaluation_of_the_kept_agent_reproduces_its_records() {
        let cfg = small(Task::Constant, Algorithm::Td3);
        let out = train_quiet(&cfg);
        let mut envs = open_envs(&cfg, BaselineCache::shared()).unwrap();
        let (records, metrics) = evaluate(&out.agent, &cfg, envs.train.as_mut()).unwrap();
        assert_eq!(records, out.eval_records);
        assert_eq!(metrics, out.metrics);
    }

    #[test]
    fn mismatched_environment_is_refused_before_training() {
        let cfg = small(Task::Dynamic, Algorithm::Dqn);
        let other = small(Task::Constant, Algorithm::Dqn);
        let mut envs = open_envs(&other, BaselineCache::shared()).unwrap();
        let mut calls = 0;
        let err = train(&cfg, &mut envs, &mut |_| {
            calls += 1;
            Ok(())
        });
        assert!(matches!(err, Err(TrainError::Env(EnvError::SpecMismatch(_)))));
        assert_eq!(calls, 0);
    }
}
