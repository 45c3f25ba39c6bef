//! Advantage actor-critic with GAE advantages.

use super::policy::{self, Exploration, PolicySample, ValueSample};
use super::{
    discrete_index, normalize, AlgoError, Algorithm, Decision, Experience, Hyperparams, Learner,
    Mode, NamedNetwork, Policy, Result, RolloutBuffer, RolloutStep, UpdateStats,
};
use crate::nn::{mlp_layers, Activation, ParamSet};
use crate::problem::DISCRETE_DELTAS_C;
use crate::rng::{self, Rng};

/// Builds the categorical actor and scalar critic shared by A2C and PPO.
pub(crate) fn actor_critic_nets(obs_dim: usize, hp: &Hyperparams, seed: u64) -> Result<(ParamSet, ParamSet)> {
    let mut seeds = rng::seeded(seed);
    let actor_seed = rand::Rng::random::<u64>(&mut seeds);
    let critic_seed = rand::Rng::random::<u64>(&mut seeds);
    let actor = ParamSet::init(
        &mlp_layers(obs_dim, &hp.hidden, DISCRETE_DELTAS_C.len(), Activation::Tanh, Activation::Identity),
        actor_seed,
    )?;
    let critic = ParamSet::init(
        &mlp_layers(obs_dim, &hp.hidden, 1, Activation::Tanh, Activation::Identity),
        critic_seed,
    )?;
    Ok((actor, critic))
}

/// Samples an action and records `log pi` and `V(s)` for the rollout.
pub(crate) fn act_with_value(
    actor: &ParamSet,
    critic: &ParamSet,
    obs: &[f64],
    rng: &mut Rng,
    mode: Mode,
) -> Result<Decision> {
    let policy = Policy::Categorical { actor: actor.clone() };
    let mut d = policy::select_action(&policy, obs, rng, mode, Exploration { epsilon: 0.0, noise_std: 0.0 })?;
    if mode == Mode::Train {
        d.value = critic.predict(obs)?[0];
    }
    Ok(d)
}

/// Advantages of the rollout, normalized when configured.
pub(crate) fn training_advantages(rollout: &RolloutBuffer, hp: &Hyperparams) -> Result<Vec<f64>> {
    if !rollout.has_advantages() {
        return Err(AlgoError::Buffer(format!(
            "{} advantages for {} steps",
            rollout.advantages.len(),
            rollout.len()
        )));
    }
    if !hp.normalize_advantages {
        return Ok(rollout.advantages.clone());
    }
    // Statistics over the steps that take part in the update.
    let idx: Vec<usize> = (0..rollout.len()).filter(|&i| rollout.steps[i].valid).collect();
    let picked: Vec<f64> = idx.iter().map(|&i| rollout.advantages[i]).collect();
    let mut out = vec![0.0; rollout.len()];
    for (i, a) in idx.into_iter().zip(normalize(&picked)) {
        out[i] = a;
    }
    Ok(out)
}

/// One actor step and one critic step on a rollout with computed advantages.
///
/// Returns `(actor_loss, critic_loss)`.
pub fn a2c_update(
    rollout: &RolloutBuffer,
    actor: &mut ParamSet,
    critic: &mut ParamSet,
    hp: &Hyperparams,
) -> Result<(f64, f64)> {
    let advantages = training_advantages(rollout, hp)?;
    let mut actor_samples = Vec::with_capacity(rollout.len());
    let mut critic_samples = Vec::with_capacity(rollout.len());
    for (i, s) in rollout.steps.iter().enumerate() {
        if !s.valid {
            continue;
        }
        actor_samples.push(PolicySample {
            obs: &s.experience.obs,
            action: discrete_index(s.experience.action)?,
            weight: advantages[i],
        });
        critic_samples.push(ValueSample {
            obs: &s.experience.obs,
            target: rollout.returns[i],
        });
    }
    let n = actor_samples.len().max(1) as f64;
    let (actor_loss, actor_grads) = policy::weighted_log_prob_loss(actor, &actor_samples, n)?;
    let (critic_loss, critic_grads) = policy::value_loss(critic, &critic_samples)?;
    policy::step_if_nonzero(actor, &actor_grads, &hp.adam_actor())?;
    policy::step_if_nonzero(critic, &critic_grads, &hp.adam_critic())?;
    Ok((actor_loss, critic_loss))
}

pub struct A2cLearner {
    actor: ParamSet,
    critic: ParamSet,
    rollout: RolloutBuffer,
    hp: Hyperparams,
}

impl A2cLearner {
    pub fn new(obs_dim: usize, hp: Hyperparams, seed: u64) -> Result<Self> {
        let (actor, critic) = actor_critic_nets(obs_dim, &hp, seed)?;
        Ok(Self::from_parts(actor, critic, hp))
    }

    pub fn from_parts(actor: ParamSet, critic: ParamSet, hp: Hyperparams) -> Self {
        Self {
            actor,
            critic,
            rollout: RolloutBuffer::new(),
            hp,
        }
    }
}

impl Learner for A2cLearner {
    fn algorithm(&self) -> Algorithm {
        Algorithm::A2c
    }

    fn act(&mut self, obs: &[f64], rng: &mut Rng, mode: Mode) -> Result<Decision> {
        act_with_value(&self.actor, &self.critic, obs, rng, mode)
    }

    fn observe(
        &mut self,
        experience: Experience,
        decision: &Decision,
        valid: bool,
        _rng: &mut Rng,
    ) -> Result<Option<UpdateStats>> {
        self.rollout.push(RolloutStep {
            experience,
            log_prob: decision.log_prob,
            value: decision.value,
            valid,
        });
        if self.rollout.trajectories() < self.hp.rollout_episodes {
            return Ok(None);
        }
        self.rollout.compute_advantages(self.hp.gamma, self.hp.gae_lambda)?;
        let (actor_loss, critic_loss) = a2c_update(&self.rollout, &mut self.actor, &mut self.critic, &self.hp)?;
        self.rollout.clear();
        Ok(Some(UpdateStats {
            actor_loss,
            critic_loss,
            clip_fraction: 0.0,
            updates: 1,
        }))
    }

    fn policy(&self) -> Policy {
        Policy::Categorical {
            actor: self.actor.clone(),
        }
    }

    fn networks(&self) -> Vec<NamedNetwork> {
        vec![
            NamedNetwork {
                name: "actor".into(),
                params: self.actor.clone(),
            },
            NamedNetwork {
                name: "critic".into(),
                params: self.critic.clone(),
            },
        ]
    }
}
