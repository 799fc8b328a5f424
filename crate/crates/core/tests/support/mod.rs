//! Artifact-side drivers shared by the integration tests and the
//! acceptance target.

#![allow(dead_code)]

use iout_core::algos::{bc_fit, cql_critic_loss, AgentLearner, LearnerConfig};
use iout_core::datasets::Batch;
use iout_core::learnkit::{Activation, Dense, Mlp};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracles::{finite_difference_grad, max_relative_error, TabularMdp};

pub fn with_params(net: &Mlp, p: &[f64]) -> Mlp {
    let mut m = net.clone();
    for (dst, src) in m.params_mut().zip(p) {
        *dst = *src;
    }
    m
}

pub fn flat(net: &Mlp) -> Vec<f64> {
    net.params().copied().collect()
}

/// Worst relative gradient error of `sum_ij c_ij f(x)_ij` for a random
/// network drawn from `seed`.
pub fn random_net_grad_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=3);
    let mut sizes = vec![rng.gen_range(1..=5)];
    for _ in 0..depth {
        sizes.push(rng.gen_range(1..=8));
    }
    sizes.push(rng.gen_range(1..=3));
    let act = [Activation::Softplus, Activation::Tanh][seed as usize % 2];
    let net = Mlp::new(&sizes, act, &mut rng);
    let rows = rng.gen_range(1..=4);
    let x = Array2::from_shape_fn((rows, sizes[0]), |_| rng.gen_range(-1.5..1.5));
    let c = Array2::from_shape_fn((rows, *sizes.last().unwrap()), |_| rng.gen_range(-1.0..1.0));

    let (_, cache) = net.forward_batch(x.view()).unwrap();
    let (g, _) = net.backward(&cache, c.view()).unwrap();
    let loss = |p: &[f64]| {
        let y = with_params(&net, p).predict_batch(x.view()).unwrap();
        (&y * &c).sum()
    };
    let fd = finite_difference_grad(loss, &flat(&net), 1e-5);
    max_relative_error(&flat(&g), &fd, 1e-6)
}

/// Worst relative gradient error through the conservative critic loss on
/// a toy batch.
pub fn cql_loss_grad_error(alpha: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (obs_dim, act_dim, n, k) = (3, 2, 3, 4);
    let q = Mlp::new(&[obs_dim + act_dim, 8, 8, 1], Activation::Softplus, &mut rng);
    let data = Array2::from_shape_fn((n, obs_dim + act_dim), |_| rng.gen_range(-1.0..1.0));
    let y = Array1::from_shape_fn(n, |_| rng.gen_range(-2.0..2.0));
    let props = Array2::from_shape_fn((n * k, obs_dim + act_dim), |_| rng.gen_range(-1.0..1.0));
    let logq = Array1::from_shape_fn(n * k, |_| rng.gen_range(-3.0..0.0));
    let out = cql_critic_loss(&q, data.view(), y.view(), props.view(), logq.view(), alpha).unwrap();
    let loss = |p: &[f64]| {
        cql_critic_loss(&with_params(&q, p), data.view(), y.view(), props.view(), logq.view(), alpha)
            .unwrap()
            .loss
    };
    let fd = finite_difference_grad(loss, &flat(&q), 1e-5);
    max_relative_error(&flat(&out.grads), &fd, 1e-6)
}

/// Three states in a cycle; the data only ever takes action 0.
pub fn cycle_mdp() -> TabularMdp {
    let data = vec![(0, 0, 1.0, 1, false), (1, 0, 0.5, 2, false), (2, 0, -0.25, 0, false)];
    let policy = vec![vec![1.0, 0.0, 0.0]; 3];
    TabularMdp { states: 3, actions: 3, data, policy, gamma: 0.9 }
}

fn one_hot(mdp: &TabularMdp, s: usize, a: usize) -> Vec<f64> {
    let mut x = vec![0.0; mdp.states * mdp.actions];
    x[s * mdp.actions + a] = 1.0;
    x
}

/// Gradient descent on the artifact loss with a linear critic over one-hot
/// state-action features, which is exactly a table.
pub fn artifact_tabular(mdp: &TabularMdp, alpha: f64, lr: f64, steps: usize) -> Vec<Vec<f64>> {
    let dim = mdp.states * mdp.actions;
    let mut q = Mlp::from_layers(vec![Dense { w: Array2::zeros((dim, 1)), b: Array1::zeros(1) }], Activation::Identity)
        .unwrap();
    let n = mdp.data.len();
    let rows = |pairs: &[(usize, usize)]| {
        let mut x = Array2::zeros((pairs.len(), dim));
        for (i, &(s, a)) in pairs.iter().enumerate() {
            x.row_mut(i).assign(&Array1::from(one_hot(mdp, s, a)));
        }
        x
    };
    let data = rows(&mdp.data.iter().map(|d| (d.0, d.1)).collect::<Vec<_>>());
    let props = rows(&mdp.data.iter().flat_map(|d| (0..mdp.actions).map(move |a| (d.0, a))).collect::<Vec<_>>());
    let logq = Array1::zeros(n * mdp.actions);
    let table = |q: &Mlp| -> Vec<Vec<f64>> {
        (0..mdp.states)
            .map(|s| (0..mdp.actions).map(|a| q.forward(&one_hot(mdp, s, a)).unwrap()[0]).collect())
            .collect()
    };
    for _ in 0..steps {
        let t = table(&q);
        let y = Array1::from_iter(mdp.data.iter().map(|&(_, _, r, s2, done)| {
            let v: f64 = (0..mdp.actions).map(|b| mdp.policy[s2][b] * t[s2][b]).sum();
            r + if done { 0.0 } else { mdp.gamma * v }
        }));
        let mut g = cql_critic_loss(&q, data.view(), y.view(), props.view(), logq.view(), alpha).unwrap().grads;
        g.layers[0].b.fill(0.0);
        q.axpy(-lr, &g).unwrap();
    }
    table(&q)
}

/// Smallest margin of the data action over the best uncovered action.
pub fn covered_gap(q: &[Vec<f64>]) -> f64 {
    q.iter().map(|row| row[0] - row[1].max(row[2])).fold(f64::INFINITY, f64::min)
}

/// Two-state chain with reward 1 on every transition, whatever the action.
pub fn chain_batch() -> Batch {
    let actions: Vec<f64> = (0..9).map(|k| -0.8 + 0.2 * k as f64).collect();
    let n = 2 * actions.len();
    let state = |i: usize| if i % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
    Batch {
        obs: Array2::from_shape_fn((n, 2), |(i, k)| state(i)[k]),
        actions: Array2::from_shape_fn((n, 1), |(i, _)| actions[i / 2]),
        rewards: Array1::from_elem(n, 1.0),
        next_obs: Array2::from_shape_fn((n, 2), |(i, k)| state(i + 1)[k]),
        done: Array1::zeros(n),
    }
}

/// Twin-critic values at the data actions and the greedy action of both
/// chain states after SAC training.
pub fn sac_chain_values() -> Vec<f64> {
    let cfg = LearnerConfig {
        hidden: vec![16, 16],
        lr: 1e-3,
        lr_alpha: 0.0,
        alpha0: 1e-6,
        tau: 0.05,
        gamma: 0.9,
        batch_size: 18,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut l = AgentLearner::new(2, 1, &cfg, &mut rng);
    let b = chain_batch();
    for _ in 0..4000 {
        l.sac_update(&b, &mut rng).unwrap();
    }
    let mut out = Vec::new();
    for s in [[1.0, 0.0], [0.0, 1.0]] {
        let greedy = l.policy.deterministic(&s).unwrap()[0];
        for a in [-0.8, 0.0, 0.8, greedy] {
            for q in [&l.q1, &l.q2] {
                out.push(q.forward(&[s[0], s[1], a]).unwrap()[0]);
            }
        }
    }
    out
}

/// Temperature trajectory over `steps` SAC updates with target entropy `h0`.
pub fn temperature_trace(h0: f64, steps: usize) -> Vec<f64> {
    let cfg = LearnerConfig { hidden: vec![8], target_entropy: h0, batch_size: 18, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut l = AgentLearner::new(2, 1, &cfg, &mut rng);
    let b = chain_batch();
    let mut trace = vec![l.alpha()];
    for _ in 0..steps {
        l.sac_update(&b, &mut rng).unwrap();
        trace.push(l.alpha());
    }
    trace
}

/// Held-out action MAE of cloning a fixed linear teacher.
pub fn bc_teacher_mae() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = ndarray::arr2(&[[0.3, -0.2], [0.1, 0.25], [-0.2, 0.15], [0.15, -0.1]]);
    let teacher = |s: &Array2<f64>| s.dot(&w);
    let train = Array2::from_shape_fn((4000, 4), |_| rng.gen_range(-1.0..1.0));
    let held = Array2::from_shape_fn((500, 4), |_| rng.gen_range(-1.0..1.0));
    let (policy, _) = bc_fit(&train, &teacher(&train), &[64, 64], 1e-3, 4000, 256, 9).unwrap();
    let pred = policy.deterministic_batch(held.view()).unwrap();
    (&pred - &teacher(&held)).mapv(f64::abs).mean().unwrap()
}

/// `(field, expected, configured)` for every Table 1 parameter and the
/// documented design defaults of a config built with no overrides.
pub fn defaults_audit() -> Vec<(&'static str, f64, f64)> {
    let c = iout_core::harness::TrainConfig::default();
    let e = &c.env;
    let l = &c.learner;
    let m = &c.mission;
    vec![
        ("env.field_size_m", 120.0, e.field_size_m),
        ("env.num_devices", 55.0, e.num_devices as f64),
        ("acoustics.center_frequency_khz", 20.0, c.acoustics.center_frequency_khz),
        ("env.water_depth_m", -50.0, e.water_depth_m),
        ("env.num_auvs", 2.0, e.num_auvs as f64),
        ("env.sailing_depth_m", -10.0, e.sailing_depth_m),
        ("env.comm_distance_m", 6.0, e.comm_distance_m),
        ("env.v_max", 2.0, e.v_max),
        ("env.vortex_intensity", 8.0, e.vortex_intensity),
        ("env.vortex_radius_m", 48.0, e.vortex_radius_m),
        ("env.duration_s", 1000.0, e.duration_s),
        ("env.dt", 1.0, e.dt),
        ("learner.lr", 2e-4, l.lr),
        ("learner.lr_alpha", 3e-4, l.lr_alpha),
        ("learner.alpha0", 0.01, l.alpha0),
        ("learner.tau", 0.01, l.tau),
        ("learner.gamma", 0.99, l.gamma),
        ("online.episodes", 400.0, c.online.episodes as f64),
        ("offline.epochs", 400.0, c.offline.epochs as f64),
        ("offline.updates_per_epoch", 5.0, c.offline.updates_per_epoch as f64),
        ("learner.target_entropy", -2.0, l.target_entropy),
        ("mission.voi.sigma", 10.0, m.voi.sigma),
        ("mission.voi.beta", 0.7, m.voi.beta),
        ("env.c_max_bits", 2.0e6, e.c_max_bits),
        ("env.crash_distance_m", 5.0, e.crash_distance_m),
        ("online.replay_capacity", 80_000.0, c.online.replay_capacity as f64),
        ("seed", 0.0, c.seed as f64),
        ("env.a_max", 0.5, e.a_max),
        ("env.ang_vel_max", std::f64::consts::FRAC_PI_4, e.ang_vel_max),
        ("env.num_vortices", 3.0, e.num_vortices as f64),
        ("env.turbulence", 1.0, e.turbulence as u8 as f64),
        ("env.needing_fraction", 0.4, e.needing_fraction),
        ("env.arrival_rate_bps", 1000.0, e.arrival_rate_bps),
        ("acoustics.source_level_db", 135.0, c.acoustics.source_level_db),
        ("acoustics.target_strength_db", 10.0, c.acoustics.target_strength_db),
        ("acoustics.directivity_index_db", 10.0, c.acoustics.directivity_index_db),
        ("acoustics.detection_threshold_db", 10.0, c.acoustics.detection_threshold_db),
        ("acoustics.bandwidth_hz", 10_000.0, c.acoustics.bandwidth_hz),
        ("acoustics.max_capacity_bps", 1.0e6, c.acoustics.max_capacity_bps),
        ("energy.hover_power_w", 5.0, c.energy.hover_power_w),
        ("energy.dt", 1.0, c.energy.dt),
        ("mission.reward.w_ec", -0.001, m.reward.w_ec),
        ("mission.reward.w_voi", 1.0, m.reward.w_voi),
        ("mission.reward.w_dr", 2e-6, m.reward.w_dr),
        ("mission.reward.w_dp", 1.0, m.reward.w_dp),
        ("mission.reward.w_cs", -5.0, m.reward.w_cs),
        ("mission.reward.d_r", 20.0, m.reward.d_r),
        ("mission.reward.o", 0.1, m.reward.o),
        ("mission.objective.data", 0.5, m.objective.data),
        ("mission.objective.capacity", 0.1, m.objective.capacity),
        ("mission.objective.voi", 0.3, m.objective.voi),
        ("mission.objective.energy", 0.1, m.objective.energy),
        ("mission.priority.xi", 0.005, m.priority.xi),
        ("observation.node_slots", 5.0, c.observation.node_slots as f64),
        ("offline.alpha_cql", 1.0, c.offline.alpha_cql),
        ("offline.num_action_samples", 10.0, c.offline.num_action_samples as f64),
        ("learner.hidden[0]", 64.0, l.hidden[0] as f64),
        ("learner.hidden[1]", 64.0, l.hidden[1] as f64),
        ("learner.batch_size", 256.0, l.batch_size as f64),
    ]
}

/// Seconds-scale run: short episodes, small networks, few updates.
pub fn tiny_config() -> iout_core::harness::TrainConfig {
    let mut c = iout_core::harness::TrainConfig::default();
    c.env.duration_s = 40.0;
    c.learner.hidden = vec![16, 16];
    c.learner.batch_size = 16;
    c.online.episodes = 2;
    c.online.warmup_steps = 30;
    c.dataset.episodes = 2;
    c.offline.epochs = 2;
    c.offline.updates_per_epoch = 3;
    c.eval.sweep_seeds = 2;
    c.eval.sweep_auvs = vec![1, 2];
    c
}
