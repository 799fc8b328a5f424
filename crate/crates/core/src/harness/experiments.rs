use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::io::SweepRow;
use super::{derive_seed, eval_seeds, evaluate, Deterministic, EpochMetrics, TrainConfig, UniformRandom};
use crate::algos::{self, AlgoError, BcOutcome, OfflineOutcome, OnlineOutcome};
use crate::datasets::{inject_gaussian_noise, Dataset};
use crate::env::IoutEnv;
use crate::learnkit::GaussianPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Online,
    Maicql,
    Bc,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Online => "online",
            Stage::Maicql => "maicql",
            Stage::Bc => "bc",
        }
    }
}

pub type Progress<'a> = &'a mut dyn FnMut(Stage, &EpochMetrics);

const TAG_SWEEP: u64 = 0x5EE9;
const TAG_BASELINE: u64 = 0xBA5E;

pub fn run_online(cfg: &TrainConfig, seed: u64, progress: Progress) -> Result<OnlineOutcome, AlgoError> {
    algos::sac_train_online(&cfg.sim(), &cfg.learner, &cfg.online, cfg.eval.online_episodes, seed, |m| {
        progress(Stage::Online, m)
    })
}

/// Expert rollouts, then observation noise from `cfg.dataset`.
pub fn build_dataset(cfg: &TrainConfig, experts: &[GaussianPolicy], seed: u64) -> Result<Dataset, AlgoError> {
    let clean = algos::gen_expert_dataset(experts, &cfg.sim(), cfg.dataset.episodes, seed)?;
    Ok(inject_gaussian_noise(&clean, cfg.dataset.noise_sigma, cfg.dataset.noise_seed)?)
}

pub fn run_maicql(cfg: &TrainConfig, data: &Dataset, seed: u64, progress: Progress) -> Result<OfflineOutcome, AlgoError> {
    algos::maicql_train(data, &cfg.sim(), &cfg.learner, &cfg.offline, seed, |m| progress(Stage::Maicql, m))
}

pub fn run_bc(cfg: &TrainConfig, data: &Dataset, seed: u64, progress: Progress) -> Result<BcOutcome, AlgoError> {
    algos::bc_train(data, &cfg.sim(), &cfg.learner, &cfg.offline, seed, |m| progress(Stage::Bc, m))
}

pub struct PipelineOutcome {
    pub online: OnlineOutcome,
    pub dataset: Dataset,
    pub maicql: OfflineOutcome,
}

/// Online expert training, dataset generation and offline training with
/// one seed.
pub fn pipeline(cfg: &TrainConfig, progress: Progress) -> Result<PipelineOutcome, AlgoError> {
    let online = run_online(cfg, cfg.seed, progress)?;
    let dataset = build_dataset(cfg, &online.best_policies, cfg.seed)?;
    let maicql = run_maicql(cfg, &dataset, cfg.seed, progress)?;
    Ok(PipelineOutcome { online, dataset, maicql })
}

/// Uniform-random actions on the offline evaluation seeds.
pub fn uniform_baseline(cfg: &TrainConfig, seed: u64) -> EpochMetrics {
    let mut env = IoutEnv::new(cfg.sim(), seed);
    let mut c = UniformRandom(ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_BASELINE, 0)));
    evaluate(&mut env, &mut c, &eval_seeds(seed, cfg.offline.eval_episodes))
}

/// Trains the full pipeline for each team size and evaluates the final
/// offline policies on `cfg.eval.sweep_seeds` episodes.
pub fn sweep_auvs(cfg: &TrainConfig, progress: &mut dyn FnMut(usize, Stage, &EpochMetrics)) -> Result<Vec<SweepRow>, AlgoError> {
    let mut rows = Vec::new();
    for &n in &cfg.eval.sweep_auvs {
        let mut c = cfg.clone();
        c.env.num_auvs = n;
        let out = pipeline(&c, &mut |s, m| progress(n, s, m))?;
        let policies: Vec<GaussianPolicy> = out.maicql.learners.iter().map(|l| l.policy.clone()).collect();
        rows.push(evaluate_sweep_row(&c, &policies));
    }
    Ok(rows)
}

/// Means over the sweep seeds; crashes are per episode.
pub fn evaluate_sweep_row(cfg: &TrainConfig, policies: &[GaussianPolicy]) -> SweepRow {
    let seeds: Vec<u64> = (0..cfg.eval.sweep_seeds as u64).map(|i| derive_seed(cfg.seed, TAG_SWEEP, i)).collect();
    let mut env = IoutEnv::new(cfg.sim(), cfg.seed);
    let m = evaluate(&mut env, &mut Deterministic(policies), &seeds);
    SweepRow {
        num_auvs: cfg.env.num_auvs,
        seeds: seeds.len(),
        cumulative_reward: m.cumulative_reward,
        sum_data_rate_kbps: m.sum_data_rate_kbps,
        sum_voi: m.sum_voi,
        avg_energy_j: m.avg_energy_j,
        crashes: m.crashes as f64 / seeds.len().max(1) as f64,
    }
}

/// Trailing moving average of evaluation reward over `window` epochs.
pub fn moving_average_reward(log: &[EpochMetrics], window: usize) -> f64 {
    let tail = &log[log.len().saturating_sub(window)..];
    tail.iter().map(|m| m.cumulative_reward).sum::<f64>() / tail.len().max(1) as f64
}
