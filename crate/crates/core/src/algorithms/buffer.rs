use rand::seq::index;

use super::{AlgoError, Result};
use crate::problem::Action;
use crate::rng::Rng;

/// One transition `{s_t, a_t, r_t, s_{t+1}, done}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub obs: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// A step of an on-policy rollout with the quantities recorded at
/// collection time.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub experience: Experience,
    pub log_prob: f64,
    pub value: f64,
    pub valid: bool,
}

/// Complete trajectories gathered by the current policy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub steps: Vec<RolloutStep>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    trajectories: usize,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: RolloutStep) {
        if step.experience.done {
            self.trajectories += 1;
        }
        self.steps.push(step);
        self.advantages.clear();
        self.returns.clear();
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of trajectories closed by a `done` step.
    pub fn trajectories(&self) -> usize {
        self.trajectories
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.advantages.clear();
        self.returns.clear();
        self.trajectories = 0;
    }

    /// Index ranges of the complete trajectories.
    pub fn trajectory_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut ranges = Vec::new();
        let mut start = 0;
        for (i, s) in self.steps.iter().enumerate() {
            if s.experience.done {
                ranges.push(start..i + 1);
                start = i + 1;
            }
        }
        ranges
    }

    /// Fills advantages and returns with GAE from the stored value estimates.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        let rewards: Vec<f64> = self.steps.iter().map(|s| s.experience.reward).collect();
        let dones: Vec<bool> = self.steps.iter().map(|s| s.experience.done).collect();
        let mut values: Vec<f64> = self.steps.iter().map(|s| s.value).collect();
        // Bootstrap value after the final step; masked when it is terminal.
        values.push(0.0);
        let (adv, ret) = super::gae::compute_gae(&rewards, &values, &dones, gamma, lambda)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    pub fn has_advantages(&self) -> bool {
        !self.steps.is_empty() && self.advantages.len() == self.steps.len()
    }
}

/// Fixed-capacity ring buffer of transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(AlgoError::Buffer("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            inserted: 0,
        })
    }

    /// Appends, overwriting the oldest entry when full.
    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// `batch_size` distinct entries drawn uniformly, or `None` when fewer
    /// are stored.
    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Option<Vec<&Experience>> {
        if batch_size > self.items.len() || batch_size == 0 {
            return None;
        }
        Some(
            index::sample(rng, self.items.len(), batch_size)
                .into_iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}
