//! Action selection and the losses shared by the policy-based learners.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AlgoError, Algorithm, Hyperparams, Result};
use crate::nn::{self, Gradients, ParamSet};
use crate::problem::Action;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// An action plus what on-policy learners must remember about it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub log_prob: f64,
    pub value: f64,
}

impl Decision {
    pub fn plain(action: Action) -> Self {
        Self {
            action,
            log_prob: 0.0,
            value: 0.0,
        }
    }
}

/// Exploration settings in force for one train-mode decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploration {
    pub epsilon: f64,
    pub noise_std: f64,
}

/// The acting part of a trained agent.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Softmax over logits (policy gradient, A2C, PPO).
    Categorical { actor: ParamSet },
    /// Argmax over Q-values (DQN).
    Greedy { q: ParamSet },
    /// Tanh actor scaled to `[low, high]` (TD3).
    Deterministic { actor: ParamSet, low: f64, high: f64 },
}

impl Policy {
    pub fn network(&self) -> &ParamSet {
        match self {
            Policy::Categorical { actor } => actor,
            Policy::Greedy { q } => q,
            Policy::Deterministic { actor, .. } => actor,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.network().input_dim()
    }

    /// Deterministic action for evaluation.
    pub fn act(&self, obs: &[f64]) -> Result<Action> {
        match self {
            Policy::Categorical { actor } => Ok(Action::Discrete(nn::argmax(&actor.predict(obs)?))),
            Policy::Greedy { q } => Ok(Action::Discrete(nn::argmax(&q.predict(obs)?))),
            Policy::Deterministic { actor, low, high } => {
                Ok(Action::Continuous(scale_action(actor.predict(obs)?[0], *low, *high)))
            }
        }
    }
}

/// Maps a tanh output in `[-1, 1]` onto `[low, high]`.
pub fn scale_action(y: f64, low: f64, high: f64) -> f64 {
    0.5 * (low + high) + 0.5 * (high - low) * y
}

/// Linearly decayed epsilon after `step` environment steps.
pub fn epsilon_at(step: u64, hp: &Hyperparams) -> f64 {
    if step >= hp.epsilon_decay_steps {
        return hp.epsilon_end;
    }
    let frac = step as f64 / hp.epsilon_decay_steps as f64;
    hp.epsilon_start + frac * (hp.epsilon_end - hp.epsilon_start)
}

/// Picks an action for `policy` in the given mode.
///
/// Train mode samples from categorical policies, applies epsilon-greedy to
/// Q-values, and adds clipped Gaussian noise to deterministic actors. Eval
/// mode is always greedy/deterministic.
pub fn select_action(
    policy: &Policy,
    obs: &[f64],
    rng: &mut Rng,
    mode: Mode,
    exploration: Exploration,
) -> Result<Decision> {
    match (policy, mode) {
        (_, Mode::Eval) => Ok(Decision::plain(policy.act(obs)?)),
        (Policy::Categorical { actor }, Mode::Train) => {
            let logits = actor.predict(obs)?;
            let (index, log_prob) = nn::sample_categorical(rng, &logits)?;
            Ok(Decision {
                action: Action::Discrete(index),
                log_prob,
                value: 0.0,
            })
        }
        (Policy::Greedy { q }, Mode::Train) => {
            let values = q.predict(obs)?;
            let index = if rng.random::<f64>() < exploration.epsilon {
                rng.random_range(0..values.len())
            } else {
                nn::argmax(&values)
            };
            Ok(Decision::plain(Action::Discrete(index)))
        }
        (Policy::Deterministic { actor, low, high }, Mode::Train) => {
            let mut a = scale_action(actor.predict(obs)?[0], *low, *high);
            if exploration.noise_std > 0.0 {
                let noise = Normal::new(0.0, exploration.noise_std)
                    .map_err(|e| AlgoError::Config(e.to_string()))?;
                a += noise.sample(rng);
            }
            Ok(Decision::plain(Action::Continuous(a.clamp(*low, *high))))
        }
    }
}

/// Convenience wrapper matching an algorithm tag to its policy shape.
pub fn check_policy_kind(algorithm: Algorithm, policy: &Policy) -> Result<()> {
    let ok = matches!(
        (algorithm, policy),
        (Algorithm::Pg | Algorithm::A2c | Algorithm::Ppo, Policy::Categorical { .. })
            | (Algorithm::Dqn, Policy::Greedy { .. })
            | (Algorithm::Td3, Policy::Deterministic { .. })
    );
    if ok {
        Ok(())
    } else {
        Err(AlgoError::Config(format!(
            "policy shape does not match algorithm `{algorithm}`"
        )))
    }
}

/// One term of a weighted log-likelihood objective.
#[derive(Debug, Clone, Copy)]
pub struct PolicySample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub weight: f64,
}

/// `-(1/norm) * sum_i weight_i * log pi(a_i | s_i)` and its gradient.
pub fn weighted_log_prob_loss(
    actor: &ParamSet,
    samples: &[PolicySample<'_>],
    norm: f64,
) -> Result<(f64, Gradients)> {
    let mut grads = actor.zero_grads();
    let mut loss = 0.0;
    for s in samples {
        let (logits, trace) = actor.forward(s.obs)?;
        let log_probs = nn::log_softmax(&logits);
        loss -= s.weight * log_probs[s.action] / norm;
        if s.weight == 0.0 {
            continue;
        }
        let grad_y: Vec<f64> = nn::log_prob_grad(&logits, s.action)
            .into_iter()
            .map(|g| -s.weight * g / norm)
            .collect();
        actor.backward_into(&trace, &grad_y, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Regression target for a scalar-output network.
#[derive(Debug, Clone, Copy)]
pub struct ValueSample<'a> {
    pub obs: &'a [f64],
    pub target: f64,
}

/// `mean_i (V(s_i) - target_i)^2` and its gradient.
pub fn value_loss(critic: &ParamSet, samples: &[ValueSample<'_>]) -> Result<(f64, Gradients)> {
    let mut grads = critic.zero_grads();
    let n = samples.len().max(1) as f64;
    let mut loss = 0.0;
    for s in samples {
        let (v, trace) = critic.forward(s.obs)?;
        let diff = v[0] - s.target;
        loss += diff * diff / n;
        critic.backward_into(&trace, &[2.0 * diff / n], &mut grads)?;
    }
    Ok((loss, grads))
}

/// Applies one Adam step unless the gradient is identically zero.
pub(crate) fn step_if_nonzero(params: &mut ParamSet, grads: &Gradients, opt: &nn::Adam) -> Result<()> {
    if !grads.is_zero() {
        params.adam_step(grads, opt)?;
    }
    Ok(())
}
