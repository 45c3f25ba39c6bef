//! The five learning algorithms and the buffers they train from.
//!
//! On-policy learners (policy gradient, A2C, PPO) collect complete
//! trajectories into a [`RolloutBuffer`] and update once enough have been
//! gathered. Off-policy learners (double DQN, TD3) push every transition into
//! a [`ReplayBuffer`] and update after each environment step.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{self, NnError, ParamSet};
use crate::problem::{Action, ActionSpec};
use crate::rng::Rng;

pub mod a2c;
pub mod buffer;
pub mod dqn;
pub mod gae;
pub mod pg;
pub mod policy;
pub mod ppo;
pub mod td3;

pub use buffer::{Experience, ReplayBuffer, RolloutBuffer, RolloutStep};
pub use policy::{Decision, Mode, Policy};

#[derive(Debug, Error, PartialEq)]
pub enum AlgoError {
    #[error(transparent)]
    Network(#[from] NnError),
    #[error("buffer error: {0}")]
    Buffer(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = AlgoError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pg,
    A2c,
    Ppo,
    Dqn,
    Td3,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Pg,
        Algorithm::A2c,
        Algorithm::Ppo,
        Algorithm::Dqn,
        Algorithm::Td3,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Pg => "pg",
            Algorithm::A2c => "a2c",
            Algorithm::Ppo => "ppo",
            Algorithm::Dqn => "dqn",
            Algorithm::Td3 => "td3",
        }
    }

    pub fn is_off_policy(self) -> bool {
        matches!(self, Algorithm::Dqn | Algorithm::Td3)
    }

    /// Action space the algorithm acts in.
    pub fn action_spec(self) -> ActionSpec {
        match self {
            Algorithm::Td3 => ActionSpec::continuous(),
            _ => ActionSpec::discrete(),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = AlgoError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| AlgoError::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_tau: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: u64,
    pub exploration_noise: f64,
    pub n_critics: usize,
    pub a_low: f64,
    pub a_high: f64,
    pub double_q: bool,
    pub ppo_epochs: usize,
    pub minibatch_size: usize,
    pub rollout_episodes: usize,
    pub hidden: Vec<usize>,
    pub normalize_advantages: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            batch_size: 64,
            replay_capacity: 100_000,
            target_tau: 0.005,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 50_000,
            policy_noise: 0.1,
            noise_clip: 0.2,
            policy_delay: 2,
            exploration_noise: 0.1,
            n_critics: 2,
            a_low: -0.5,
            a_high: 0.5,
            double_q: true,
            ppo_epochs: 10,
            minibatch_size: 64,
            rollout_episodes: 10,
            hidden: vec![64, 64],
            normalize_advantages: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(AlgoError::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("gae_lambda", self.gae_lambda)?;
        unit("target_tau", self.target_tau)?;
        unit("epsilon_start", self.epsilon_start)?;
        unit("epsilon_end", self.epsilon_end)?;
        if !(self.clip_eps > 0.0) {
            return Err(AlgoError::Config("clip_eps must be positive".into()));
        }
        if !(self.a_low < self.a_high) {
            return Err(AlgoError::Config("a_low must be below a_high".into()));
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return Err(AlgoError::Config("learning rates must be positive".into()));
        }
        let positive = [
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("n_critics", self.n_critics),
            ("ppo_epochs", self.ppo_epochs),
            ("minibatch_size", self.minibatch_size),
            ("rollout_episodes", self.rollout_episodes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(AlgoError::Config(format!("{name} must be positive")));
            }
        }
        if self.policy_delay == 0 {
            return Err(AlgoError::Config("policy_delay must be positive".into()));
        }
        if self.noise_clip < 0.0 || self.policy_noise < 0.0 || self.exploration_noise < 0.0 {
            return Err(AlgoError::Config("noise parameters must be non-negative".into()));
        }
        if self.hidden.contains(&0) {
            return Err(AlgoError::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    fn adam_actor(&self) -> nn::Adam {
        nn::Adam::with_lr(self.lr_actor)
    }

    fn adam_critic(&self) -> nn::Adam {
        nn::Adam::with_lr(self.lr_critic)
    }
}

/// Loss diagnostics from one update call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub clip_fraction: f64,
    pub updates: u64,
}

impl UpdateStats {
    /// Running mean of two stats blocks weighted by update count.
    pub fn merge(self, other: UpdateStats) -> UpdateStats {
        let n = self.updates + other.updates;
        if n == 0 {
            return self;
        }
        let w = |a: f64, b: f64| (a * self.updates as f64 + b * other.updates as f64) / n as f64;
        UpdateStats {
            actor_loss: w(self.actor_loss, other.actor_loss),
            critic_loss: w(self.critic_loss, other.critic_loss),
            clip_fraction: w(self.clip_fraction, other.clip_fraction),
            updates: n,
        }
    }
}

/// A named network inside a learner.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedNetwork {
    pub name: String,
    pub params: ParamSet,
}

/// Common interface of the five learners.
pub trait Learner: Send {
    fn algorithm(&self) -> Algorithm;

    fn act(&mut self, obs: &[f64], rng: &mut Rng, mode: Mode) -> Result<Decision>;

    /// Feeds back the outcome of the last decision. `valid` is false for
    /// steps excluded from learning.
    fn observe(
        &mut self,
        experience: Experience,
        decision: &Decision,
        valid: bool,
        rng: &mut Rng,
    ) -> Result<Option<UpdateStats>>;

    /// Greedy policy snapshot.
    fn policy(&self) -> Policy;

    /// Online networks, in a stable order.
    fn networks(&self) -> Vec<NamedNetwork>;
}

/// Builds a freshly initialized learner; network seeds derive from `seed`.
pub fn build_learner(
    algorithm: Algorithm,
    obs_dim: usize,
    hp: &Hyperparams,
    seed: u64,
) -> Result<Box<dyn Learner>> {
    hp.validate()?;
    Ok(match algorithm {
        Algorithm::Pg => Box::new(pg::PgLearner::new(obs_dim, hp.clone(), seed)?),
        Algorithm::A2c => Box::new(a2c::A2cLearner::new(obs_dim, hp.clone(), seed)?),
        Algorithm::Ppo => Box::new(ppo::PpoLearner::new(obs_dim, hp.clone(), seed)?),
        Algorithm::Dqn => Box::new(dqn::DqnLearner::new(obs_dim, hp.clone(), seed)?),
        Algorithm::Td3 => Box::new(td3::Td3Learner::new(obs_dim, hp.clone(), seed)?),
    })
}

/// Rebuilds a learner around previously trained online networks (optimizer
/// state and target networks start from the loaded weights).
pub fn learner_from_networks(
    algorithm: Algorithm,
    networks: &[NamedNetwork],
    hp: &Hyperparams,
    seed: u64,
) -> Result<Box<dyn Learner>> {
    hp.validate()?;
    let get = |name: &str| {
        networks
            .iter()
            .find(|n| n.name == name)
            .map(|n| n.params.clone())
            .ok_or_else(|| AlgoError::Config(format!("missing network `{name}`")))
    };
    Ok(match algorithm {
        Algorithm::Pg => Box::new(pg::PgLearner::from_actor(get("actor")?, hp.clone())),
        Algorithm::A2c => Box::new(a2c::A2cLearner::from_parts(
            get("actor")?,
            get("critic")?,
            hp.clone(),
        )),
        Algorithm::Ppo => Box::new(ppo::PpoLearner::from_parts(
            get("actor")?,
            get("critic")?,
            hp.clone(),
        )),
        Algorithm::Dqn => Box::new(dqn::DqnLearner::from_online(get("q")?, hp.clone())?),
        Algorithm::Td3 => {
            let critics = (0..hp.n_critics)
                .map(|i| get(&format!("critic{}", i + 1)))
                .collect::<Result<Vec<_>>>()?;
            Box::new(td3::Td3Learner::from_parts(get("actor")?, critics, hp.clone(), seed)?)
        }
    })
}

/// Mean and (population) std normalization; a constant vector maps to zeros.
pub(crate) fn normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    if values.is_empty() {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    values.iter().map(|v| (v - mean) / (std + 1e-8)).collect()
}

/// Action index carried by a discrete decision.
pub(crate) fn discrete_index(action: Action) -> Result<usize> {
    match action {
        Action::Discrete(i) => Ok(i),
        Action::Continuous(_) => Err(AlgoError::Buffer(
            "continuous action in a discrete-action buffer".into(),
        )),
    }
}

pub(crate) fn continuous_value(action: Action) -> Result<f64> {
    match action {
        Action::Continuous(v) => Ok(v),
        Action::Discrete(_) => Err(AlgoError::Buffer(
            "discrete action in a continuous-action buffer".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_tags_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.tag().parse::<Algorithm>().unwrap(), a);
        }
        assert!("sac".parse::<Algorithm>().is_err());
    }

    #[test]
    fn hyperparam_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        let bad = Hyperparams {
            gamma: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = Hyperparams {
            a_low: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn normalize_constant_is_zero() {
        assert_eq!(normalize(&[2.0, 2.0]), vec![0.0, 0.0]);
    }
}
