//! Cross-checks of the learning algorithms against independent oracles:
//! finite differences, brute-force sums, value iteration and a solvable
//! control task.

use demandgym::algorithms::dqn::{self, QSample};
use demandgym::algorithms::gae::compute_gae;
use demandgym::algorithms::policy::{self, PolicySample, ValueSample};
use demandgym::algorithms::ppo::{self, SurrogateSample};
use demandgym::algorithms::td3::{self, CriticSample, Td3Learner};
use demandgym::algorithms::{Experience, Hyperparams, Learner, Mode, ReplayBuffer};
use demandgym::nn::{mlp_layers, Activation, Gradients, ParamSet};
use demandgym::problem::Action;
use demandgym::rng;
use rand::Rng as _;

fn net(input: usize, output: usize, seed: u64) -> ParamSet {
    ParamSet::init(&mlp_layers(input, &[5, 4], output, Activation::Tanh, Activation::Identity), seed).unwrap()
}

/// Central differences of `loss` around `params`, compared with `analytic`
/// as `||a - n|| / max(||a||, ||n||)`.
fn fd_rel_error(params: &ParamSet, analytic: &Gradients, loss: impl Fn(&ParamSet) -> f64) -> f64 {
    let base = params.flat_params();
    let h = 1e-5;
    let mut probe = params.clone();
    let mut numeric = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_flat_params(&p).unwrap();
        let up = loss(&probe);
        p[i] = base[i] - h;
        probe.set_flat_params(&p).unwrap();
        let down = loss(&probe);
        numeric.push((up - down) / (2.0 * h));
    }
    let a = analytic.flat();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(&numeric).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(&a).max(norm(&numeric)).max(1e-12)
}

fn observations(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| (0..dim).map(|_| r.random_range(-1.0..1.5)).collect()).collect()
}

#[test]
fn log_prob_loss_gradient_matches_finite_differences() {
    let actor = net(3, 3, 1);
    let obs = observations(6, 3, 2);
    let samples: Vec<_> = obs
        .iter()
        .enumerate()
        .map(|(i, o)| PolicySample { obs: o, action: i % 3, weight: 0.3 * i as f64 - 0.8 })
        .collect();
    let (_, g) = policy::weighted_log_prob_loss(&actor, &samples, 2.0).unwrap();
    let err = fd_rel_error(&actor, &g, |p| policy::weighted_log_prob_loss(p, &samples, 2.0).unwrap().0);
    assert!(err < 1e-6, "relative error {err}");
}

#[test]
fn value_loss_gradient_matches_finite_differences() {
    let critic = net(3, 1, 3);
    let obs = observations(6, 3, 4);
    let samples: Vec<_> = obs
        .iter()
        .enumerate()
        .map(|(i, o)| ValueSample { obs: o, target: 1.0 - 0.4 * i as f64 })
        .collect();
    let (_, g) = policy::value_loss(&critic, &samples).unwrap();
    let err = fd_rel_error(&critic, &g, |p| policy::value_loss(p, &samples).unwrap().0);
    assert!(err < 1e-6, "relative error {err}");
}

#[test]
fn surrogate_loss_gradient_matches_finite_differences() {
    let actor = net(3, 3, 5);
    let obs = observations(8, 3, 6);
    // Old log-probs close to the current ones keep every ratio away from the
    // clip boundary, where the objective is not differentiable.
    let samples: Vec<_> = obs
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let logits = actor.predict(o).unwrap();
            let lp = demandgym::nn::log_softmax(&logits)[i % 3];
            SurrogateSample {
                obs: o,
                action: i % 3,
                old_log_prob: lp + 0.05 * (i as f64 - 4.0) / 4.0,
                advantage: if i % 2 == 0 { 1.2 } else { -0.7 },
            }
        })
        .collect();
    let (_, g, _) = ppo::surrogate_loss(&actor, &samples, 0.2).unwrap();
    let err = fd_rel_error(&actor, &g, |p| ppo::surrogate_loss(p, &samples, 0.2).unwrap().0);
    assert!(err < 1e-6, "relative error {err}");

    // Far outside the clip range the gradient vanishes where the clipped
    // branch is the minimum.
    let clipped: Vec<_> = samples
        .iter()
        .map(|s| SurrogateSample { old_log_prob: s.old_log_prob - 2.0, advantage: 1.0, ..*s })
        .collect();
    let (_, g, frac) = ppo::surrogate_loss(&actor, &clipped, 0.2).unwrap();
    assert_eq!(frac, 1.0);
    assert!(g.is_zero());
}

#[test]
fn q_loss_gradient_matches_finite_differences() {
    let q = net(3, 3, 7);
    let obs = observations(6, 3, 8);
    let samples: Vec<_> = obs
        .iter()
        .enumerate()
        .map(|(i, o)| QSample { obs: o, action: (i * 2) % 3, target: 0.5 * i as f64 - 1.0 })
        .collect();
    let (_, g) = dqn::q_loss(&q, &samples).unwrap();
    let err = fd_rel_error(&q, &g, |p| dqn::q_loss(p, &samples).unwrap().0);
    assert!(err < 1e-6, "relative error {err}");
}

#[test]
fn td3_gradients_match_finite_differences() {
    let actor = ParamSet::init(&mlp_layers(3, &[5], 1, Activation::Tanh, Activation::Tanh), 9).unwrap();
    let critic = net(4, 1, 10);
    let obs = observations(6, 3, 11);
    let samples: Vec<_> = obs
        .iter()
        .enumerate()
        .map(|(i, o)| CriticSample { obs: o, action: 0.1 * i as f64 - 0.3, target: 0.2 * i as f64 })
        .collect();
    let (_, g) = td3::critic_loss(&critic, &samples).unwrap();
    let err = fd_rel_error(&critic, &g, |p| td3::critic_loss(p, &samples).unwrap().0);
    assert!(err < 1e-6, "critic relative error {err}");

    let refs: Vec<&[f64]> = obs.iter().map(|o| o.as_slice()).collect();
    let (_, g) = td3::actor_loss(&actor, &critic, &refs, -0.5, 0.5).unwrap();
    let err = fd_rel_error(&actor, &g, |p| td3::actor_loss(p, &critic, &refs, -0.5, 0.5).unwrap().0);
    assert!(err < 1e-6, "actor relative error {err}");
}

#[test]
fn gae_matches_brute_force_sum() {
    let mut r = rng::seeded(12);
    for _ in 0..1000 {
        let n = r.random_range(1..30);
        let gamma: f64 = r.random();
        let lambda: f64 = r.random();
        let rewards: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let values: Vec<f64> = (0..=n).map(|_| r.random_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| r.random::<f64>() < 0.15).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &dones, gamma, lambda).unwrap();
        let delta = |t: usize| {
            let live = if dones[t] { 0.0 } else { 1.0 };
            rewards[t] + gamma * values[t + 1] * live - values[t]
        };
        for t in 0..n {
            let mut sum = 0.0;
            for l in 0..n - t {
                sum += (gamma * lambda).powi(l as i32) * delta(t + l);
                if dones[t + l] {
                    break;
                }
            }
            assert!((adv[t] - sum).abs() < 1e-12, "t={t}: {} vs {sum}", adv[t]);
            assert!((ret[t] - (adv[t] + values[t])).abs() < 1e-12);
        }
    }
}

/// Deterministic chain: states 0 and 1 are live, state 2 is terminal.
/// Actions move left, stay, or move right; entering state 2 pays 1 and
/// every other move costs 0.1.
fn chain_step(s: usize, a: usize) -> (usize, f64, bool) {
    let next = (s as i64 + a as i64 - 1).clamp(0, 2) as usize;
    if next == 2 {
        (next, 1.0, true)
    } else {
        (next, -0.1, false)
    }
}

fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; 3];
    v[s] = 1.0;
    v
}

fn value_iteration(gamma: f64) -> [[f64; 3]; 2] {
    let mut q = [[0.0; 3]; 2];
    for _ in 0..10_000 {
        let mut next = q;
        for s in 0..2 {
            for a in 0..3 {
                let (s2, r, done) = chain_step(s, a);
                let v = if done { 0.0 } else { q[s2].iter().copied().fold(f64::MIN, f64::max) };
                next[s][a] = r + gamma * v;
            }
        }
        q = next;
    }
    q
}

#[test]
fn double_dqn_converges_on_chain() {
    let gamma = 0.9;
    let oracle = value_iteration(gamma);
    let hp = Hyperparams {
        gamma,
        batch_size: 6,
        lr_critic: 1e-3,
        target_tau: 0.05,
        hidden: vec![16],
        ..Default::default()
    };
    let mut replay = ReplayBuffer::new(6).unwrap();
    for s in 0..2 {
        for a in 0..3 {
            let (s2, r, done) = chain_step(s, a);
            replay.push(Experience {
                obs: one_hot(s),
                action: Action::Discrete(a),
                reward: r,
                next_obs: one_hot(s2),
                done,
            });
        }
    }
    let mut online = ParamSet::init(&mlp_layers(3, &hp.hidden, 3, Activation::Tanh, Activation::Identity), 13).unwrap();
    let mut target = online.clone();
    let mut r = rng::seeded(14);
    let max_err = |online: &ParamSet| {
        (0..2)
            .flat_map(|s| {
                let q = online.predict(&one_hot(s)).unwrap();
                (0..3).map(move |a| (q[a] - oracle[s][a]).abs())
            })
            .fold(0.0, f64::max)
    };
    let mut updates = 0;
    while updates < 20_000 {
        dqn::ddqn_update(&replay, &mut online, &mut target, &hp, &mut r).unwrap();
        updates += 1;
        if updates % 500 == 0 && max_err(&online) < 1e-2 {
            break;
        }
    }
    let err = max_err(&online);
    assert!(err < 1e-2, "max |Q - Q*| = {err} after {updates} updates");
}

#[test]
fn td3_solves_linear_tracking_task() {
    let hp = Hyperparams {
        hidden: vec![32, 32],
        lr_actor: 1e-3,
        lr_critic: 1e-3,
        ..Default::default()
    };
    let mut learner = Td3Learner::new(1, hp, 15).unwrap();
    let mut r = rng::seeded(16);
    let eval_states: Vec<f64> = (0..200).map(|i| -0.5 + i as f64 / 199.0).collect();
    let reward = |s: f64, a: f64| -(a - 0.8 * s).powi(2);
    let mut best = f64::NEG_INFINITY;
    for step in 1..=50_000 {
        let s: f64 = r.random_range(-0.5..0.5);
        let d = learner.act(&[s], &mut r, Mode::Train).unwrap();
        let exp = Experience {
            obs: vec![s],
            action: d.action,
            reward: reward(s, d.action.value()),
            next_obs: vec![s],
            done: true,
        };
        learner.observe(exp, &d, true, &mut r).unwrap();
        if step % 1000 == 0 {
            let policy = learner.policy();
            let mean = eval_states
                .iter()
                .map(|&s| reward(s, policy.act(&[s]).unwrap().value()))
                .sum::<f64>()
                / eval_states.len() as f64;
            best = best.max(mean);
            if mean > -0.01 {
                break;
            }
        }
    }
    assert!(best > -0.01, "best mean eval reward {best}");
}
