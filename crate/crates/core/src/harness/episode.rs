use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Transition;
use crate::env::IoutEnv;
use crate::learnkit::GaussianPolicy;

/// Produces a squashed action in `[-1, 1]^2` for one agent.
pub trait Controller {
    fn act(&mut self, agent: usize, obs: &[f64]) -> Vec<f64>;
}

impl<F: FnMut(usize, &[f64]) -> Vec<f64>> Controller for F {
    fn act(&mut self, agent: usize, obs: &[f64]) -> Vec<f64> {
        self(agent, obs)
    }
}

/// `tanh(mean)` of one policy per agent.
pub struct Deterministic<'a>(pub &'a [GaussianPolicy]);

impl Controller for Deterministic<'_> {
    fn act(&mut self, agent: usize, obs: &[f64]) -> Vec<f64> {
        self.0[agent].deterministic(obs).expect("policy matches observation width")
    }
}

/// Reparameterized samples from one policy per agent.
pub struct Stochastic<'a> {
    pub policies: &'a [GaussianPolicy],
    pub rng: ChaCha8Rng,
}

impl Controller for Stochastic<'_> {
    fn act(&mut self, agent: usize, obs: &[f64]) -> Vec<f64> {
        self.policies[agent].sample(obs, &mut self.rng).expect("policy matches observation width")
    }
}

/// Uniform actions over the action box.
pub struct UniformRandom(pub ChaCha8Rng);

impl Controller for UniformRandom {
    fn act(&mut self, _agent: usize, _obs: &[f64]) -> Vec<f64> {
        vec![self.0.gen_range(-1.0..=1.0), self.0.gen_range(-1.0..=1.0)]
    }
}

/// Always the zero action (hold speed and heading).
pub struct ZeroAction;

impl Controller for ZeroAction {
    fn act(&mut self, _agent: usize, _obs: &[f64]) -> Vec<f64> {
        vec![0.0, 0.0]
    }
}

/// Aggregates for one evaluation episode, plus training diagnostics when
/// produced by a trainer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Sum over agents and steps of the per-step reward.
    pub cumulative_reward: f64,
    /// Total collected bits over elapsed episode time, in kbit/s.
    pub sum_data_rate_kbps: f64,
    pub sum_voi: f64,
    /// Mean energy per AUV over the episode (J).
    pub avg_energy_j: f64,
    pub crashes: u64,
    pub steps: usize,
    pub objective: f64,
    pub critic_loss: Vec<f64>,
    pub policy_loss: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl EpochMetrics {
    pub fn with_losses(mut self, critic: Vec<f64>, policy: Vec<f64>, alpha: Vec<f64>) -> Self {
        self.critic_loss = critic;
        self.policy_loss = policy;
        self.alpha = alpha;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub auv_id: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub energy: f64,
    /// Index of the target node, `-1` when idle.
    pub target: i64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Record {
    pub trajectory: bool,
    pub transitions: bool,
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeOutcome {
    pub metrics: EpochMetrics,
    pub trajectory: Vec<TrajectoryRow>,
    pub transitions: Vec<Transition>,
}

fn snapshot(env: &IoutEnv, rows: &mut Vec<TrajectoryRow>) {
    for (j, a) in env.world.auvs.iter().enumerate() {
        rows.push(TrajectoryRow {
            time: env.world.time,
            auv_id: j,
            x: a.position.x,
            y: a.position.y,
            heading: a.heading,
            speed: a.speed_cmd,
            energy: a.energy_spent,
            target: a.target_node.map_or(-1, |t| t as i64),
        });
    }
}

/// Resets the world with `seed` and runs until every needing node is
/// drained or the time limit is reached.
pub fn run_episode(env: &mut IoutEnv, controller: &mut dyn Controller, seed: u64, record: Record) -> EpisodeOutcome {
    let mut obs = env.reset(seed);
    let n = env.num_agents();
    let mut out = EpisodeOutcome::default();
    if record.trajectory {
        snapshot(env, &mut out.trajectory);
    }
    let mut m = EpochMetrics::default();
    loop {
        let actions: Vec<Vec<f64>> = (0..n).map(|j| controller.act(j, &obs[j])).collect();
        let res = env.step_squashed(&actions);
        let next = env.observations();
        m.cumulative_reward += res.rewards.iter().sum::<f64>();
        m.crashes += res.new_crashes as u64;
        m.steps += 1;
        if record.trajectory {
            snapshot(env, &mut out.trajectory);
        }
        if record.transitions {
            out.transitions.push(Transition::from_f64(
                &obs,
                &actions,
                &res.rewards,
                &next,
                res.terminal,
                res.done(),
            ));
        }
        obs = next;
        if res.done() {
            break;
        }
    }
    let bits: f64 = env.logs.iter().map(|l| l.data_bits).sum();
    m.sum_data_rate_kbps = bits / env.world.time.max(f64::MIN_POSITIVE) / 1000.0;
    m.sum_voi = env.logs.iter().map(|l| l.voi_sum).sum();
    m.avg_energy_j = env.logs.iter().map(|l| l.energy_j).sum::<f64>() / n as f64;
    m.objective = crate::mission::episode_objective(&env.logs, &env.cfg.mission.objective);
    out.metrics = m;
    out
}

/// Metrics averaged over several evaluation seeds; `crashes` and `steps`
/// are totals.
pub fn evaluate(env: &mut IoutEnv, controller: &mut dyn Controller, seeds: &[u64]) -> EpochMetrics {
    let mut acc = EpochMetrics::default();
    for &s in seeds {
        let m = run_episode(env, controller, s, Record::default()).metrics;
        acc.cumulative_reward += m.cumulative_reward;
        acc.sum_data_rate_kbps += m.sum_data_rate_kbps;
        acc.sum_voi += m.sum_voi;
        acc.avg_energy_j += m.avg_energy_j;
        acc.crashes += m.crashes;
        acc.steps += m.steps;
        acc.objective += m.objective;
    }
    let k = seeds.len().max(1) as f64;
    acc.cumulative_reward /= k;
    acc.sum_data_rate_kbps /= k;
    acc.sum_voi /= k;
    acc.avg_energy_j /= k;
    acc.objective /= k;
    acc
}
