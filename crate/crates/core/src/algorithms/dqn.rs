//! Deep Q-learning with a soft-updated target network and the double-Q target.

use super::policy::{self, Exploration};
use super::{
    discrete_index, Algorithm, Decision, Experience, Hyperparams, Learner, Mode, NamedNetwork,
    Policy, ReplayBuffer, Result, UpdateStats,
};
use crate::nn::{self, mlp_layers, Activation, Gradients, ParamSet};
use crate::problem::DISCRETE_DELTAS_C;
use crate::rng::Rng;

/// Bootstrapped target for one transition.
///
/// With `double_q` the online network picks the next action and the target
/// network scores it; otherwise the target network's own maximum is used.
pub fn td_target(
    reward: f64,
    gamma: f64,
    done: bool,
    q_online_next: &[f64],
    q_target_next: &[f64],
    double_q: bool,
) -> f64 {
    if done {
        return reward;
    }
    let next = if double_q {
        q_target_next[nn::argmax(q_online_next)]
    } else {
        q_target_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    reward + gamma * next
}

/// A regression target for one action's Q-value.
#[derive(Debug, Clone, Copy)]
pub struct QSample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub target: f64,
}

/// `mean_i (Q(s_i, a_i) - y_i)^2` and its gradient.
pub fn q_loss(online: &ParamSet, samples: &[QSample<'_>]) -> Result<(f64, Gradients)> {
    let mut grads = online.zero_grads();
    let n = samples.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad_y = vec![0.0; online.output_dim()];
    for s in samples {
        let (q, trace) = online.forward(s.obs)?;
        let diff = q[s.action] - s.target;
        loss += diff * diff / n;
        grad_y.fill(0.0);
        grad_y[s.action] = 2.0 * diff / n;
        online.backward_into(&trace, &grad_y, &mut grads)?;
    }
    Ok((loss, grads))
}

/// One sampled update of the online network followed by a soft target
/// update. Returns `None` while the buffer holds fewer than a batch.
pub fn ddqn_update(
    replay: &ReplayBuffer,
    online: &mut ParamSet,
    target: &mut ParamSet,
    hp: &Hyperparams,
    rng: &mut Rng,
) -> Result<Option<f64>> {
    let Some(batch) = replay.sample(hp.batch_size, rng) else {
        return Ok(None);
    };
    let mut targets = Vec::with_capacity(batch.len());
    for e in &batch {
        let y = if e.done {
            e.reward
        } else {
            let q_online = if hp.double_q { online.predict(&e.next_obs)? } else { Vec::new() };
            td_target(e.reward, hp.gamma, false, &q_online, &target.predict(&e.next_obs)?, hp.double_q)
        };
        targets.push(y);
    }
    let samples = batch
        .iter()
        .zip(&targets)
        .map(|(e, &y)| {
            Ok(QSample {
                obs: &e.obs,
                action: discrete_index(e.action)?,
                target: y,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (loss, grads) = q_loss(online, &samples)?;
    policy::step_if_nonzero(online, &grads, &hp.adam_critic())?;
    target.soft_update_from(online, hp.target_tau)?;
    Ok(Some(loss))
}

pub struct DqnLearner {
    online: ParamSet,
    target: ParamSet,
    replay: ReplayBuffer,
    steps: u64,
    hp: Hyperparams,
}

impl DqnLearner {
    pub fn new(obs_dim: usize, hp: Hyperparams, seed: u64) -> Result<Self> {
        let spec = mlp_layers(obs_dim, &hp.hidden, DISCRETE_DELTAS_C.len(), Activation::Tanh, Activation::Identity);
        Self::from_online(ParamSet::init(&spec, seed)?, hp)
    }

    pub fn from_online(online: ParamSet, hp: Hyperparams) -> Result<Self> {
        Ok(Self {
            target: online.clone(),
            online,
            replay: ReplayBuffer::new(hp.replay_capacity)?,
            steps: 0,
            hp,
        })
    }

    pub fn epsilon(&self) -> f64 {
        policy::epsilon_at(self.steps, &self.hp)
    }

    pub fn online(&self) -> &ParamSet {
        &self.online
    }
}

impl Learner for DqnLearner {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Dqn
    }

    fn act(&mut self, obs: &[f64], rng: &mut Rng, mode: Mode) -> Result<Decision> {
        let policy = Policy::Greedy { q: self.online.clone() };
        let exploration = Exploration {
            epsilon: self.epsilon(),
            noise_std: 0.0,
        };
        policy::select_action(&policy, obs, rng, mode, exploration)
    }

    fn observe(
        &mut self,
        experience: Experience,
        _decision: &Decision,
        valid: bool,
        rng: &mut Rng,
    ) -> Result<Option<UpdateStats>> {
        self.steps += 1;
        if valid {
            self.replay.push(experience);
        }
        let loss = ddqn_update(&self.replay, &mut self.online, &mut self.target, &self.hp, rng)?;
        Ok(loss.map(|critic_loss| UpdateStats {
            critic_loss,
            updates: 1,
            ..Default::default()
        }))
    }

    fn policy(&self) -> Policy {
        Policy::Greedy { q: self.online.clone() }
    }

    fn networks(&self) -> Vec<NamedNetwork> {
        vec![NamedNetwork {
            name: "q".into(),
            params: self.online.clone(),
        }]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_by_hand() {
        let online = [0.2, 0.7];
        let target = [0.5, 0.3];
        assert!((td_target(1.0, 0.9, false, &online, &target, true) - 1.27).abs() < 1e-12);
        assert!((td_target(1.0, 0.9, false, &online, &target, false) - 1.45).abs() < 1e-12);
        assert_eq!(td_target(1.0, 0.9, true, &online, &target, true), 1.0);
    }

    #[test]
    fn update_defers_until_a_batch_is_stored() {
        let hp = Hyperparams {
            batch_size: 4,
            ..Default::default()
        };
        let mut learner = DqnLearner::new(1, hp, 0).unwrap();
        let mut rng = crate::rng::seeded(0);
        let e = Experience {
            obs: vec![0.0],
            action: crate::problem::Action::Discrete(0),
            reward: 1.0,
            next_obs: vec![0.0],
            done: true,
        };
        let d = Decision::plain(e.action);
        for i in 0..4 {
            let out = learner.observe(e.clone(), &d, true, &mut rng).unwrap();
            assert_eq!(out.is_some(), i == 3);
        }
    }
}
