//! Twin delayed deep deterministic policy gradient (TD3).
//!
//! Critics take the observation with the action value appended as their
//! last input.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::policy::{self, scale_action, Exploration};
use super::{
    continuous_value, AlgoError, Algorithm, Decision, Experience, Hyperparams, Learner, Mode,
    NamedNetwork, Policy, ReplayBuffer, Result, UpdateStats,
};
use crate::nn::{mlp_layers, Activation, Gradients, ParamSet};
use crate::rng::{self, Rng};

/// `clip(mu + clip(noise, -c, c), low, high)`.
pub fn target_action(mu: f64, noise: f64, noise_clip: f64, low: f64, high: f64) -> f64 {
    (mu + noise.clamp(-noise_clip, noise_clip)).clamp(low, high)
}

/// `r + gamma * (1 - done) * min_i Q_i`.
pub fn critic_target(reward: f64, gamma: f64, done: bool, target_qs: &[f64]) -> f64 {
    if done {
        return reward;
    }
    reward + gamma * target_qs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn critic_input(obs: &[f64], action: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(obs.len() + 1);
    x.extend_from_slice(obs);
    x.push(action);
    x
}

/// A critic regression target.
#[derive(Debug, Clone, Copy)]
pub struct CriticSample<'a> {
    pub obs: &'a [f64],
    pub action: f64,
    pub target: f64,
}

/// `mean_i (Q(s_i, a_i) - y_i)^2` and its gradient.
pub fn critic_loss(critic: &ParamSet, samples: &[CriticSample<'_>]) -> Result<(f64, Gradients)> {
    let mut grads = critic.zero_grads();
    let n = samples.len().max(1) as f64;
    let mut loss = 0.0;
    for s in samples {
        let (q, trace) = critic.forward(&critic_input(s.obs, s.action))?;
        let diff = q[0] - s.target;
        loss += diff * diff / n;
        critic.backward_into(&trace, &[2.0 * diff / n], &mut grads)?;
    }
    Ok((loss, grads))
}

/// `-mean_i Q(s_i, mu(s_i))` and its gradient with respect to the actor.
pub fn actor_loss(
    actor: &ParamSet,
    critic: &ParamSet,
    observations: &[&[f64]],
    low: f64,
    high: f64,
) -> Result<(f64, Gradients)> {
    let mut grads = actor.zero_grads();
    let mut critic_scratch = critic.zero_grads();
    let n = observations.len().max(1) as f64;
    let half_range = 0.5 * (high - low);
    let mut loss = 0.0;
    for obs in observations {
        let (y, actor_trace) = actor.forward(obs)?;
        let a = scale_action(y[0], low, high);
        let (q, critic_trace) = critic.forward(&critic_input(obs, a))?;
        loss -= q[0] / n;
        let dq_dx = critic.backward_into(&critic_trace, &[-1.0 / n], &mut critic_scratch)?;
        let dq_da = dq_dx[dq_dx.len() - 1];
        actor.backward_into(&actor_trace, &[dq_da * half_range], &mut grads)?;
    }
    Ok((loss, grads))
}

/// Online and target networks of a TD3 agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Td3Nets {
    pub actor: ParamSet,
    pub actor_target: ParamSet,
    pub critics: Vec<ParamSet>,
    pub critic_targets: Vec<ParamSet>,
}

impl Td3Nets {
    pub fn new(actor: ParamSet, critics: Vec<ParamSet>) -> Self {
        Self {
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
        }
    }
}

/// One TD3 step: both critics regress to the clipped double-Q target, and on
/// every `policy_delay`-th step the actor ascends the first critic and all
/// targets soft-update. `step` counts updates from 1.
pub fn td3_update(
    replay: &ReplayBuffer,
    nets: &mut Td3Nets,
    hp: &Hyperparams,
    step: u64,
    rng: &mut Rng,
) -> Result<Option<UpdateStats>> {
    let Some(batch) = replay.sample(hp.batch_size, rng) else {
        return Ok(None);
    };
    let noise = Normal::new(0.0, hp.policy_noise).map_err(|e| AlgoError::Config(e.to_string()))?;
    let mut samples = Vec::with_capacity(batch.len());
    for e in &batch {
        let target = if e.done {
            e.reward
        } else {
            let mu = scale_action(nets.actor_target.predict(&e.next_obs)?[0], hp.a_low, hp.a_high);
            let eps = if hp.policy_noise > 0.0 { noise.sample(rng) } else { 0.0 };
            let a_next = target_action(mu, eps, hp.noise_clip, hp.a_low, hp.a_high);
            let x = critic_input(&e.next_obs, a_next);
            let qs = nets
                .critic_targets
                .iter()
                .map(|c| Ok(c.predict(&x)?[0]))
                .collect::<Result<Vec<f64>>>()?;
            critic_target(e.reward, hp.gamma, false, &qs)
        };
        samples.push(CriticSample {
            obs: &e.obs,
            action: continuous_value(e.action)?,
            target,
        });
    }
    let opt_critic = hp.adam_critic();
    let mut stats = UpdateStats {
        updates: 1,
        ..Default::default()
    };
    for critic in nets.critics.iter_mut() {
        let (loss, grads) = critic_loss(critic, &samples)?;
        policy::step_if_nonzero(critic, &grads, &opt_critic)?;
        stats.critic_loss += loss / hp.n_critics as f64;
    }
    if step.is_multiple_of(hp.policy_delay) {
        let observations: Vec<&[f64]> = batch.iter().map(|e| e.obs.as_slice()).collect();
        let (loss, grads) = actor_loss(&nets.actor, &nets.critics[0], &observations, hp.a_low, hp.a_high)?;
        policy::step_if_nonzero(&mut nets.actor, &grads, &hp.adam_actor())?;
        stats.actor_loss = loss;
        nets.actor_target.soft_update_from(&nets.actor, hp.target_tau)?;
        for (t, c) in nets.critic_targets.iter_mut().zip(&nets.critics) {
            t.soft_update_from(c, hp.target_tau)?;
        }
    }
    Ok(Some(stats))
}

pub struct Td3Learner {
    nets: Td3Nets,
    replay: ReplayBuffer,
    updates: u64,
    hp: Hyperparams,
}

impl Td3Learner {
    pub fn new(obs_dim: usize, hp: Hyperparams, seed: u64) -> Result<Self> {
        let mut seeds = rng::seeded(seed);
        let actor = ParamSet::init(
            &mlp_layers(obs_dim, &hp.hidden, 1, Activation::Relu, Activation::Tanh),
            seeds.random(),
        )?;
        let critic_spec = mlp_layers(obs_dim + 1, &hp.hidden, 1, Activation::Relu, Activation::Identity);
        let critics = (0..hp.n_critics)
            .map(|_| ParamSet::init(&critic_spec, seeds.random()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(actor, critics, hp, seed)
    }

    pub fn from_parts(actor: ParamSet, critics: Vec<ParamSet>, hp: Hyperparams, _seed: u64) -> Result<Self> {
        if critics.len() != hp.n_critics || critics.is_empty() {
            return Err(AlgoError::Config(format!(
                "expected {} critics, got {}",
                hp.n_critics,
                critics.len()
            )));
        }
        if critics.iter().any(|c| c.input_dim() != actor.input_dim() + 1 || c.output_dim() != 1) {
            return Err(AlgoError::Config("critic shape does not match the actor".into()));
        }
        Ok(Self {
            nets: Td3Nets::new(actor, critics),
            replay: ReplayBuffer::new(hp.replay_capacity)?,
            updates: 0,
            hp,
        })
    }

    pub fn nets(&self) -> &Td3Nets {
        &self.nets
    }
}

impl Learner for Td3Learner {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Td3
    }

    fn act(&mut self, obs: &[f64], rng: &mut Rng, mode: Mode) -> Result<Decision> {
        let exploration = Exploration {
            epsilon: 0.0,
            noise_std: self.hp.exploration_noise,
        };
        policy::select_action(&self.policy(), obs, rng, mode, exploration)
    }

    fn observe(
        &mut self,
        experience: Experience,
        _decision: &Decision,
        valid: bool,
        rng: &mut Rng,
    ) -> Result<Option<UpdateStats>> {
        if valid {
            self.replay.push(experience);
        }
        if self.replay.len() < self.hp.batch_size {
            return Ok(None);
        }
        self.updates += 1;
        td3_update(&self.replay, &mut self.nets, &self.hp, self.updates, rng)
    }

    fn policy(&self) -> Policy {
        Policy::Deterministic {
            actor: self.nets.actor.clone(),
            low: self.hp.a_low,
            high: self.hp.a_high,
        }
    }

    fn networks(&self) -> Vec<NamedNetwork> {
        let mut out = vec![NamedNetwork {
            name: "actor".into(),
            params: self.nets.actor.clone(),
        }];
        for (i, c) in self.nets.critics.iter().enumerate() {
            out.push(NamedNetwork {
                name: format!("critic{}", i + 1),
                params: c.clone(),
            });
        }
        out
    }
}
