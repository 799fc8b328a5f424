use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AgentLearner, CqlConfig, LearnerConfig, LossRecord};
use crate::datasets::{Batch, Dataset, DatasetError, DatasetHeader, ReplayBuffer, Transition, REPLAY_CAPACITY};
use crate::env::{IoutEnv, SimConfig};
use crate::harness::{derive_seed, eval_seeds, evaluate, run_episode, Deterministic, EpochMetrics, Record, Stochastic};
use crate::learnkit::{read_networks, write_networks, Adam, CheckpointError, GaussianPolicy, LearnError};
use crate::mdp_io::ACTION_DIM;

#[derive(Debug, Error)]
pub enum AlgoError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("checkpoint {path}: {source}")]
    Checkpoint { path: PathBuf, source: CheckpointError },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("incompatible: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, AlgoError>;

/// Online soft actor-critic schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineConfig {
    pub episodes: usize,
    /// Uniform-random steps before the first update.
    pub warmup_steps: usize,
    /// Environment steps between update rounds.
    pub update_every: usize,
    /// Gradient updates per agent in each round.
    pub updates_per_round: usize,
    pub replay_capacity: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self { episodes: 400, warmup_steps: 2000, update_every: 1, updates_per_round: 1, replay_capacity: REPLAY_CAPACITY }
    }
}

/// Offline schedule, shared by the conservative learner and cloning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfflineConfig {
    pub epochs: usize,
    /// Gradient updates per agent per epoch.
    pub updates_per_epoch: usize,
    pub alpha_cql: f64,
    pub num_action_samples: usize,
    /// Evaluation episodes after each epoch.
    pub eval_episodes: usize,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        let c = CqlConfig::default();
        Self {
            epochs: 400,
            updates_per_epoch: 5,
            alpha_cql: c.alpha_cql,
            num_action_samples: c.num_action_samples,
            eval_episodes: 1,
        }
    }
}

impl OfflineConfig {
    pub fn cql(&self) -> CqlConfig {
        CqlConfig { alpha_cql: self.alpha_cql, num_action_samples: self.num_action_samples }
    }
}

pub struct OnlineOutcome {
    pub learners: Vec<AgentLearner>,
    /// Policies from the episode with the best evaluation reward.
    pub best_policies: Vec<GaussianPolicy>,
    pub best_reward: f64,
    pub log: Vec<EpochMetrics>,
}

pub struct OfflineOutcome {
    pub learners: Vec<AgentLearner>,
    /// Epoch 0 is the untrained policy.
    pub log: Vec<EpochMetrics>,
}

pub struct BcOutcome {
    pub policies: Vec<GaussianPolicy>,
    pub log: Vec<EpochMetrics>,
}

fn agent_rng(seed: u64, tag: u64, j: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, j as u64))
}

const TAG_INIT: u64 = 1;
const TAG_AGENT: u64 = 2;
const TAG_EPISODE: u64 = 3;
const TAG_ACT: u64 = 4;
const TAG_DATASET: u64 = 5;

/// Independent learners with identical initial parameters.
fn init_learners(n: usize, obs_dim: usize, cfg: &LearnerConfig, seed: u64) -> Vec<AgentLearner> {
    (0..n).map(|_| AgentLearner::new(obs_dim, ACTION_DIM, cfg, &mut agent_rng(seed, TAG_INIT, 0))).collect()
}

#[derive(Default)]
struct LossAcc {
    critic: f64,
    policy: f64,
    alpha: f64,
    count: usize,
}

impl LossAcc {
    fn add(&mut self, r: &LossRecord) {
        self.critic += r.critic_loss;
        self.policy += r.policy_loss;
        self.alpha = r.alpha;
        self.count += 1;
    }

    fn means(accs: &[LossAcc], learners: &[AgentLearner]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mean = |v: f64, c: usize| if c == 0 { 0.0 } else { v / c as f64 };
        (
            accs.iter().map(|a| mean(a.critic, a.count)).collect(),
            accs.iter().map(|a| mean(a.policy, a.count)).collect(),
            learners.iter().map(|l| l.alpha()).collect(),
        )
    }
}

fn policies_of(learners: &[AgentLearner]) -> Vec<GaussianPolicy> {
    learners.iter().map(|l| l.policy.clone()).collect()
}

/// Online soft actor-critic with a shared replay memory of joint
/// transitions. After every episode the deterministic policies are
/// evaluated and the best set is kept.
pub fn sac_train_online(
    sim: &SimConfig,
    lcfg: &LearnerConfig,
    ocfg: &OnlineConfig,
    eval_episodes: usize,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<OnlineOutcome> {
    let mut env = IoutEnv::new(sim.clone(), seed);
    let mut eval_env = IoutEnv::new(sim.clone(), seed);
    let n = env.num_agents();
    let od = env.obs_dim();
    let mut learners = init_learners(n, od, lcfg, seed);
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|j| agent_rng(seed, TAG_AGENT, j)).collect();
    let mut act_rng = agent_rng(seed, TAG_ACT, 0);
    let mut buffer = ReplayBuffer::new(ocfg.replay_capacity.max(1));
    let evals = eval_seeds(seed, eval_episodes);
    let mut best_policies = policies_of(&learners);
    let mut best_reward = f64::NEG_INFINITY;
    let mut log = Vec::with_capacity(ocfg.episodes);
    let mut total_steps = 0usize;

    for episode in 1..=ocfg.episodes {
        let mut obs = env.reset(derive_seed(seed, TAG_EPISODE, episode as u64));
        let mut accs: Vec<LossAcc> = (0..n).map(|_| LossAcc::default()).collect();
        loop {
            let actions: Vec<Vec<f64>> = if total_steps < ocfg.warmup_steps {
                (0..n).map(|_| vec![act_rng.gen_range(-1.0..=1.0), act_rng.gen_range(-1.0..=1.0)]).collect()
            } else {
                (0..n).map(|j| learners[j].policy.sample(&obs[j], &mut act_rng)).collect::<std::result::Result<_, _>>()?
            };
            let res = env.step_squashed(&actions);
            let next = env.observations();
            buffer.push(Transition::from_f64(&obs, &actions, &res.rewards, &next, res.terminal, res.done()));
            obs = next;
            total_steps += 1;
            if total_steps >= ocfg.warmup_steps && total_steps % ocfg.update_every.max(1) == 0 {
                for j in 0..n {
                    for _ in 0..ocfg.updates_per_round {
                        let items = buffer.sample(lcfg.batch_size, &mut rngs[j])?;
                        let batch = Batch::for_agent(&items, j, od, ACTION_DIM);
                        let rec = learners[j].sac_update(&batch, &mut rngs[j])?;
                        accs[j].add(&rec);
                    }
                }
            }
            if res.done() {
                break;
            }
        }
        let policies = policies_of(&learners);
        let (c, p, a) = LossAcc::means(&accs, &learners);
        let mut m = evaluate(&mut eval_env, &mut Deterministic(&policies), &evals).with_losses(c, p, a);
        m.epoch = episode;
        if m.cumulative_reward > best_reward {
            best_reward = m.cumulative_reward;
            best_policies = policies;
        }
        on_epoch(&m);
        log.push(m);
    }
    Ok(OnlineOutcome { learners, best_policies, best_reward, log })
}

/// Rolls out stochastic expert policies and records every joint transition.
pub fn gen_expert_dataset(policies: &[GaussianPolicy], sim: &SimConfig, episodes: usize, seed: u64) -> Result<Dataset> {
    let od = sim.obs_dim();
    if policies.len() != sim.env.num_auvs {
        return Err(AlgoError::Incompatible(format!(
            "{} policies for {} AUVs",
            policies.len(),
            sim.env.num_auvs
        )));
    }
    if let Some(p) = policies.iter().find(|p| p.obs_dim() != od || p.act_dim != ACTION_DIM) {
        return Err(AlgoError::Incompatible(format!(
            "policy expects observation width {} and action width {}, config has {} and {}",
            p.obs_dim(),
            p.act_dim,
            od,
            ACTION_DIM
        )));
    }
    let mut env = IoutEnv::new(sim.clone(), seed);
    let mut controller = Stochastic { policies, rng: agent_rng(seed, TAG_ACT, 0) };
    let mut data = Dataset::new(DatasetHeader::for_config(sim, seed));
    for e in 0..episodes {
        let out = run_episode(
            &mut env,
            &mut controller,
            derive_seed(seed, TAG_DATASET, e as u64),
            Record { trajectory: false, transitions: true },
        );
        for t in out.transitions {
            data.push(t);
        }
    }
    Ok(data)
}

fn check_offline(dataset: &Dataset, sim: &SimConfig) -> Result<()> {
    if dataset.is_empty() {
        return Err(AlgoError::EmptyDataset);
    }
    dataset.check_compatible(sim)?;
    Ok(())
}

/// Independent conservative learners, one per AUV, trained from the
/// offline dataset only. The environment is used for evaluation.
pub fn maicql_train(
    dataset: &Dataset,
    sim: &SimConfig,
    lcfg: &LearnerConfig,
    ocfg: &OfflineConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<OfflineOutcome> {
    check_offline(dataset, sim)?;
    let n = dataset.num_agents();
    let od = dataset.obs_dim();
    let mut learners = init_learners(n, od, lcfg, seed);
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|j| agent_rng(seed, TAG_AGENT, j)).collect();
    let mut eval_env = IoutEnv::new(sim.clone(), seed);
    let evals = eval_seeds(seed, ocfg.eval_episodes);
    let cql = ocfg.cql();

    let mut log = Vec::with_capacity(ocfg.epochs + 1);
    let m0 = evaluate(&mut eval_env, &mut Deterministic(&policies_of(&learners)), &evals);
    on_epoch(&m0);
    log.push(m0);
    for epoch in 1..=ocfg.epochs {
        let mut accs: Vec<LossAcc> = (0..n).map(|_| LossAcc::default()).collect();
        for j in 0..n {
            for _ in 0..ocfg.updates_per_epoch {
                let batch = dataset.sample_agent(j, lcfg.batch_size, &mut rngs[j])?;
                let rec = learners[j].cql_update(&batch, &cql, &mut rngs[j])?;
                accs[j].add(&rec);
            }
        }
        let (c, p, a) = LossAcc::means(&accs, &learners);
        let mut m = evaluate(&mut eval_env, &mut Deterministic(&policies_of(&learners)), &evals).with_losses(c, p, a);
        m.epoch = epoch;
        on_epoch(&m);
        log.push(m);
    }
    Ok(OfflineOutcome { learners, log })
}

/// One cloning step: ascend the mean log-likelihood of `actions`.
pub fn bc_step(
    policy: &mut GaussianPolicy,
    opt: &mut Adam,
    obs: ArrayView2<f64>,
    actions: ArrayView2<f64>,
) -> std::result::Result<f64, LearnError> {
    let (ll, mut g) = policy.log_likelihood(obs, actions)?;
    g.scale(-1.0);
    opt.step(&mut policy.net, &g)?;
    Ok(-ll)
}

/// Behavioral cloning of every agent's dataset actions.
pub fn bc_train(
    dataset: &Dataset,
    sim: &SimConfig,
    lcfg: &LearnerConfig,
    ocfg: &OfflineConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<BcOutcome> {
    check_offline(dataset, sim)?;
    let n = dataset.num_agents();
    let od = dataset.obs_dim();
    let mut policies: Vec<GaussianPolicy> = (0..n)
        .map(|_| GaussianPolicy::new(od, ACTION_DIM, &lcfg.hidden, &mut agent_rng(seed, TAG_INIT, 0)))
        .collect();
    let mut opts: Vec<Adam> = policies.iter().map(|p| Adam::new(&p.net, lcfg.lr)).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|j| agent_rng(seed, TAG_AGENT, j)).collect();
    let mut eval_env = IoutEnv::new(sim.clone(), seed);
    let evals = eval_seeds(seed, ocfg.eval_episodes);

    let mut log = Vec::with_capacity(ocfg.epochs + 1);
    let m0 = evaluate(&mut eval_env, &mut Deterministic(&policies), &evals);
    on_epoch(&m0);
    log.push(m0);
    for epoch in 1..=ocfg.epochs {
        let mut losses = vec![0.0; n];
        for j in 0..n {
            for _ in 0..ocfg.updates_per_epoch {
                let b = dataset.sample_agent(j, lcfg.batch_size, &mut rngs[j])?;
                losses[j] += bc_step(&mut policies[j], &mut opts[j], b.obs.view(), b.actions.view())?;
            }
            losses[j] /= ocfg.updates_per_epoch.max(1) as f64;
        }
        let mut m = evaluate(&mut eval_env, &mut Deterministic(&policies), &evals).with_losses(
            vec![0.0; n],
            losses,
            vec![0.0; n],
        );
        m.epoch = epoch;
        on_epoch(&m);
        log.push(m);
    }
    Ok(BcOutcome { policies, log })
}

/// Clones `actions` given `obs` with full-batch or minibatch steps.
pub fn bc_fit(
    obs: &Array2<f64>,
    actions: &Array2<f64>,
    hidden: &[usize],
    lr: f64,
    steps: usize,
    batch_size: usize,
    seed: u64,
) -> Result<(GaussianPolicy, Vec<f64>)> {
    if obs.nrows() == 0 {
        return Err(AlgoError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = GaussianPolicy::new(obs.ncols(), actions.ncols(), hidden, &mut rng);
    let mut opt = Adam::new(&policy.net, lr);
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let loss = if batch_size >= obs.nrows() {
            bc_step(&mut policy, &mut opt, obs.view(), actions.view())?
        } else {
            let idx: Vec<usize> = (0..batch_size).map(|_| rng.gen_range(0..obs.nrows())).collect();
            let o = obs.select(ndarray::Axis(0), &idx);
            let a = actions.select(ndarray::Axis(0), &idx);
            bc_step(&mut policy, &mut opt, o.view(), a.view())?
        };
        losses.push(loss);
    }
    Ok((policy, losses))
}

fn agent_path(dir: &Path, j: usize) -> PathBuf {
    dir.join(format!("agent_{j}.ckpt"))
}

fn write_ckpt(path: &Path, nets: &[&crate::learnkit::Mlp]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_networks(&mut w, nets).map_err(|source| AlgoError::Checkpoint { path: path.to_owned(), source })?;
    w.flush()?;
    Ok(())
}

/// Writes `agent_<j>.ckpt` with policy, critics and target critics.
pub fn save_learners(dir: &Path, learners: &[AgentLearner]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (j, l) in learners.iter().enumerate() {
        write_ckpt(&agent_path(dir, j), &[&l.policy.net, &l.q1, &l.q2, &l.q1_target, &l.q2_target])?;
    }
    Ok(())
}

/// Writes `agent_<j>.ckpt` holding only the policy network.
pub fn save_policies(dir: &Path, policies: &[GaussianPolicy]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (j, p) in policies.iter().enumerate() {
        write_ckpt(&agent_path(dir, j), &[&p.net])?;
    }
    Ok(())
}

/// Loads the policy network (first entry) of `agent_<j>.ckpt` for every agent.
pub fn load_policies(dir: &Path, num_agents: usize) -> Result<Vec<GaussianPolicy>> {
    (0..num_agents)
        .map(|j| {
            let path = agent_path(dir, j);
            let file = File::open(&path)
                .map_err(|e| AlgoError::Checkpoint { path: path.clone(), source: CheckpointError::Io(e) })?;
            let nets = read_networks(&mut BufReader::new(file))
                .map_err(|source| AlgoError::Checkpoint { path: path.clone(), source })?;
            let net = nets.into_iter().next().ok_or_else(|| AlgoError::Checkpoint {
                path: path.clone(),
                source: CheckpointError::Malformed("no networks".into()),
            })?;
            Ok(GaussianPolicy::from_net(net, ACTION_DIM)?)
        })
        .collect()
}
