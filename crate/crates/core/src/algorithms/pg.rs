//! Monte-Carlo policy gradient (REINFORCE) with a batch-mean return baseline.

use super::policy::{self, Exploration, PolicySample};
use super::{
    discrete_index, AlgoError, Algorithm, Decision, Experience, Hyperparams, Learner, Mode,
    NamedNetwork, Policy, Result, RolloutBuffer, RolloutStep, UpdateStats,
};
use crate::nn::{mlp_layers, Activation, ParamSet};
use crate::problem::DISCRETE_DELTAS_C;
use crate::rng::Rng;

/// Discounted return of each complete trajectory, measured from its first step.
pub fn trajectory_returns(rollout: &RolloutBuffer, gamma: f64) -> Vec<f64> {
    rollout
        .trajectory_ranges()
        .into_iter()
        .map(|r| {
            rollout.steps[r]
                .iter()
                .rev()
                .fold(0.0, |acc, s| s.experience.reward + gamma * acc)
        })
        .collect()
}

/// One policy-gradient step on the complete trajectories in `rollout`.
///
/// Every step of trajectory `tau` is weighted by the centered return
/// `R(tau) - mean(R)`, and the loss is averaged over trajectories.
pub fn pg_update(rollout: &RolloutBuffer, actor: &mut ParamSet, hp: &Hyperparams) -> Result<f64> {
    let ranges = rollout.trajectory_ranges();
    if ranges.is_empty() {
        return Err(AlgoError::Buffer("policy gradient needs at least one complete trajectory".into()));
    }
    let returns = trajectory_returns(rollout, hp.gamma);
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let mut samples = Vec::with_capacity(rollout.len());
    for (range, ret) in ranges.into_iter().zip(&returns) {
        for s in &rollout.steps[range] {
            if s.valid {
                samples.push(PolicySample {
                    obs: &s.experience.obs,
                    action: discrete_index(s.experience.action)?,
                    weight: ret - mean,
                });
            }
        }
    }
    let (loss, grads) = policy::weighted_log_prob_loss(actor, &samples, returns.len() as f64)?;
    policy::step_if_nonzero(actor, &grads, &hp.adam_actor())?;
    Ok(loss)
}

pub struct PgLearner {
    actor: ParamSet,
    rollout: RolloutBuffer,
    hp: Hyperparams,
}

impl PgLearner {
    pub fn new(obs_dim: usize, hp: Hyperparams, seed: u64) -> Result<Self> {
        let spec = mlp_layers(
            obs_dim,
            &hp.hidden,
            DISCRETE_DELTAS_C.len(),
            Activation::Tanh,
            Activation::Identity,
        );
        Ok(Self::from_actor(ParamSet::init(&spec, seed)?, hp))
    }

    pub fn from_actor(actor: ParamSet, hp: Hyperparams) -> Self {
        Self {
            actor,
            rollout: RolloutBuffer::new(),
            hp,
        }
    }
}

impl Learner for PgLearner {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Pg
    }

    fn act(&mut self, obs: &[f64], rng: &mut Rng, mode: Mode) -> Result<Decision> {
        let policy = Policy::Categorical {
            actor: self.actor.clone(),
        };
        policy::select_action(&policy, obs, rng, mode, Exploration { epsilon: 0.0, noise_std: 0.0 })
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
            value: 0.0,
            valid,
        });
        if self.rollout.trajectories() < self.hp.rollout_episodes {
            return Ok(None);
        }
        let loss = pg_update(&self.rollout, &mut self.actor, &self.hp)?;
        self.rollout.clear();
        Ok(Some(UpdateStats {
            actor_loss: loss,
            updates: 1,
            ..Default::default()
        }))
    }

    fn policy(&self) -> Policy {
        Policy::Categorical {
            actor: self.actor.clone(),
        }
    }

    fn networks(&self) -> Vec<NamedNetwork> {
        vec![NamedNetwork {
            name: "actor".into(),
            params: self.actor.clone(),
        }]
    }
}
