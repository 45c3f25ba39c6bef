//! Proximal policy optimization with the clipped surrogate objective.

use rand::seq::SliceRandom;

use super::a2c::{act_with_value, actor_critic_nets, training_advantages};
use super::policy::{self, ValueSample};
use super::{
    discrete_index, AlgoError, Algorithm, Decision, Experience, Hyperparams, Learner, Mode,
    NamedNetwork, Policy, Result, RolloutBuffer, RolloutStep, UpdateStats,
};
use crate::nn::{self, Gradients, ParamSet};
use crate::rng::Rng;

/// `min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// A rollout step as seen by the surrogate loss.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateSample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
}

/// Negative mean clipped objective, its gradient, and the fraction of
/// samples whose ratio fell outside the clip range.
pub fn surrogate_loss(
    actor: &ParamSet,
    samples: &[SurrogateSample<'_>],
    eps: f64,
) -> Result<(f64, Gradients, f64)> {
    let mut grads = actor.zero_grads();
    let n = samples.len().max(1) as f64;
    let mut loss = 0.0;
    let mut clipped = 0usize;
    for s in samples {
        let (logits, trace) = actor.forward(s.obs)?;
        let log_prob = nn::log_softmax(&logits)[s.action];
        let ratio = (log_prob - s.old_log_prob).exp();
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }
        let unclipped = ratio * s.advantage;
        let objective = clipped_objective(ratio, s.advantage, eps);
        loss -= objective / n;
        // The clipped branch is flat in the parameters; only the unclipped
        // branch carries gradient when it attains the minimum.
        if unclipped <= objective && s.advantage != 0.0 {
            let scale = -unclipped / n;
            let grad_y: Vec<f64> = nn::log_prob_grad(&logits, s.action)
                .into_iter()
                .map(|g| scale * g)
                .collect();
            actor.backward_into(&trace, &grad_y, &mut grads)?;
        }
    }
    Ok((loss, grads, clipped as f64 / n))
}

/// Runs `hp.ppo_epochs` passes of shuffled minibatch updates over a rollout
/// with computed advantages.
pub fn ppo_update(
    rollout: &RolloutBuffer,
    actor: &mut ParamSet,
    critic: &mut ParamSet,
    hp: &Hyperparams,
    rng: &mut Rng,
) -> Result<UpdateStats> {
    let advantages = training_advantages(rollout, hp)?;
    let mut indices: Vec<usize> = Vec::with_capacity(rollout.len());
    for (i, s) in rollout.steps.iter().enumerate() {
        if !s.valid {
            continue;
        }
        if !s.log_prob.is_finite() {
            return Err(AlgoError::Buffer(format!("step {i} has no recorded log-probability")));
        }
        indices.push(i);
    }
    let mut stats = UpdateStats::default();
    if indices.is_empty() {
        return Ok(stats);
    }
    let (opt_actor, opt_critic) = (hp.adam_actor(), hp.adam_critic());
    for _ in 0..hp.ppo_epochs {
        indices.shuffle(rng);
        for batch in indices.chunks(hp.minibatch_size) {
            let mut surrogate = Vec::with_capacity(batch.len());
            let mut values = Vec::with_capacity(batch.len());
            for &i in batch {
                let s = &rollout.steps[i];
                surrogate.push(SurrogateSample {
                    obs: &s.experience.obs,
                    action: discrete_index(s.experience.action)?,
                    old_log_prob: s.log_prob,
                    advantage: advantages[i],
                });
                values.push(ValueSample {
                    obs: &s.experience.obs,
                    target: rollout.returns[i],
                });
            }
            let (actor_loss, actor_grads, clip_fraction) = surrogate_loss(actor, &surrogate, hp.clip_eps)?;
            let (value_loss, mut critic_grads) = policy::value_loss(critic, &values)?;
            critic_grads.scale(0.5);
            policy::step_if_nonzero(actor, &actor_grads, &opt_actor)?;
            policy::step_if_nonzero(critic, &critic_grads, &opt_critic)?;
            stats = stats.merge(UpdateStats {
                actor_loss: actor_loss + 0.5 * value_loss,
                critic_loss: value_loss,
                clip_fraction,
                updates: 1,
            });
        }
    }
    Ok(stats)
}

pub struct PpoLearner {
    actor: ParamSet,
    critic: ParamSet,
    rollout: RolloutBuffer,
    hp: Hyperparams,
}

impl PpoLearner {
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

impl Learner for PpoLearner {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Ppo
    }

    fn act(&mut self, obs: &[f64], rng: &mut Rng, mode: Mode) -> Result<Decision> {
        act_with_value(&self.actor, &self.critic, obs, rng, mode)
    }

    fn observe(
        &mut self,
        experience: Experience,
        decision: &Decision,
        valid: bool,
        rng: &mut Rng,
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
        let stats = ppo_update(&self.rollout, &mut self.actor, &mut self.critic, &self.hp, rng)?;
        self.rollout.clear();
        Ok(Some(stats))
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::policy::PolicySample;

    #[test]
    fn clip_rule_by_hand() {
        assert_eq!(clipped_objective(1.5, 2.0, 0.2), 2.4);
        assert_eq!(clipped_objective(0.5, -1.0, 0.2), -0.8);
        assert_eq!(clipped_objective(1.0, 0.7, 0.2), 0.7);
    }

    #[test]
    fn identity_ratio_matches_actor_critic_gradient() {
        let hp = Hyperparams::default();
        let (actor, _) = actor_critic_nets(2, &hp, 5).unwrap();
        let obs = [[0.2, -0.1], [0.9, 0.4], [0.0, 1.2]];
        let adv = [0.7, -1.3, 0.4];
        let surrogate: Vec<_> = (0..3)
            .map(|i| {
                let logits = actor.predict(&obs[i]).unwrap();
                SurrogateSample {
                    obs: &obs[i],
                    action: i,
                    old_log_prob: nn::log_softmax(&logits)[i],
                    advantage: adv[i],
                }
            })
            .collect();
        let weighted: Vec<_> = (0..3)
            .map(|i| PolicySample { obs: &obs[i], action: i, weight: adv[i] })
            .collect();
        let (loss, g, clip) = surrogate_loss(&actor, &surrogate, 0.2).unwrap();
        let (_, g_ref) = policy::weighted_log_prob_loss(&actor, &weighted, 3.0).unwrap();
        assert_eq!(clip, 0.0);
        assert!((loss + adv.iter().sum::<f64>() / 3.0).abs() < 1e-12);
        for (a, b) in g.flat().iter().zip(g_ref.flat()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_advantage_leaves_actor_unchanged() {
        let hp = Hyperparams {
            normalize_advantages: false,
            ..Default::default()
        };
        let (mut actor, mut critic) = actor_critic_nets(1, &hp, 6).unwrap();
        let mut r = RolloutBuffer::new();
        r.push(RolloutStep {
            experience: Experience {
                obs: vec![0.3],
                action: crate::problem::Action::Discrete(1),
                reward: 0.0,
                next_obs: vec![0.3],
                done: true,
            },
            log_prob: -1.0,
            value: 0.0,
            valid: true,
        });
        r.compute_advantages(hp.gamma, hp.gae_lambda).unwrap();
        r.advantages = vec![0.0];
        let before = actor.clone();
        let mut rng = crate::rng::seeded(0);
        ppo_update(&r, &mut actor, &mut critic, &hp, &mut rng).unwrap();
        assert_eq!(actor, before);
    }
}
