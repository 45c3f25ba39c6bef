//! Generalized advantage estimation.

use super::{AlgoError, Result};

/// Advantages `A_t = sum_l (gamma*lambda)^l delta_{t+l}` by the backward
/// recursion, and returns `R_t = A_t + V(s_t)`.
///
/// `values` holds `V(s_0) .. V(s_n)`: one more entry than `rewards`, the
/// last being the bootstrap value after the final step. A `done` flag cuts
/// both the bootstrap and the recursion at that step.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if n == 0 {
        return Err(AlgoError::Buffer("cannot compute advantages of an empty rollout".into()));
    }
    if values.len() != n + 1 || dones.len() != n {
        return Err(AlgoError::Buffer(format!(
            "expected {} values and {n} done flags, got {} and {}",
            n + 1,
            values.len(),
            dones.len()
        )));
    }
    let mut advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        advantages[t] = next_adv;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}
