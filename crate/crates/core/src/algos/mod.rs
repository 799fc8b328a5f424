//! Per-agent actor-critic learners: soft actor-critic updates for the
//! online phase, the conservative critic objective for offline training,
//! and behavioral cloning.

mod cql;
mod train;

pub use cql::{cql_critic_loss, CqlLoss};
pub use train::{
    bc_fit, bc_step, bc_train, gen_expert_dataset, load_policies, maicql_train, sac_train_online, save_learners,
    save_policies, AlgoError, BcOutcome, OfflineConfig, OfflineOutcome, OnlineConfig, OnlineOutcome,
};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Batch;
use crate::learnkit::{concat_cols, Adam, GaussianPolicy, LearnError, Mlp, ScalarAdam, StepStatus};
use crate::learnkit::Activation;

/// Hyperparameters shared by every learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub lr_alpha: f64,
    pub alpha0: f64,
    pub tau: f64,
    pub gamma: f64,
    pub target_entropy: f64,
    pub batch_size: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            lr: 2e-4,
            lr_alpha: 3e-4,
            alpha0: 0.01,
            tau: 0.01,
            gamma: 0.99,
            target_entropy: -2.0,
            batch_size: 256,
        }
    }
}

/// Conservative-penalty settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CqlConfig {
    pub alpha_cql: f64,
    /// Samples per state from each proposal (uniform and policy).
    pub num_action_samples: usize,
}

impl Default for CqlConfig {
    fn default() -> Self {
        Self { alpha_cql: 1.0, num_action_samples: 10 }
    }
}

/// Losses and temperature after one update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossRecord {
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
    /// Conservative penalty (zero for plain TD updates).
    pub penalty: f64,
    pub diagnostics: Vec<String>,
}

/// Policy, twin critics, their target copies and the entropy temperature.
#[derive(Debug, Clone)]
pub struct AgentLearner {
    pub policy: GaussianPolicy,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_alpha: f64,
    pub cfg: LearnerConfig,
    opt_policy: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    opt_alpha: ScalarAdam,
}

fn note(diags: &mut Vec<String>, what: &str, status: Result<StepStatus, LearnError>) {
    match status {
        Ok(StepStatus::Applied) => {}
        Ok(StepStatus::SkippedNonFinite) => diags.push(format!("{what}: non-finite gradient, step skipped")),
        Err(e) => diags.push(format!("{what}: {e}")),
    }
}

impl AgentLearner {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, cfg: &LearnerConfig, rng: &mut R) -> Self {
        let policy = GaussianPolicy::new(obs_dim, act_dim, &cfg.hidden, rng);
        let mut sizes = vec![obs_dim + act_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let q1 = Mlp::new(&sizes, Activation::Softplus, rng);
        let q2 = Mlp::new(&sizes, Activation::Softplus, rng);
        Self {
            opt_policy: Adam::new(&policy.net, cfg.lr),
            opt_q1: Adam::new(&q1, cfg.lr),
            opt_q2: Adam::new(&q2, cfg.lr),
            opt_alpha: ScalarAdam::new(cfg.lr_alpha),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1,
            q2,
            policy,
            log_alpha: cfg.alpha0.ln(),
            cfg: cfg.clone(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.act_dim
    }

    /// Min over the two target critics of `Q(s, a)`.
    pub fn min_target_q(&self, obs: ArrayView2<f64>, act: ArrayView2<f64>) -> Result<Array1<f64>, LearnError> {
        let x = concat_cols(obs, act);
        let a = self.q1_target.predict_batch(x.view())?;
        let b = self.q2_target.predict_batch(x.view())?;
        Ok(ndarray::Zip::from(a.column(0)).and(b.column(0)).map_collect(|&p, &q| p.min(q)))
    }

    /// `r + gamma (1 - done) (min Q'(s', a') - alpha log pi(a'|s'))` with
    /// `a'` drawn from the current policy.
    pub fn td_targets<R: Rng + ?Sized>(&self, batch: &Batch, rng: &mut R) -> Result<Array1<f64>, LearnError> {
        let next = self.policy.sample_batch(batch.next_obs.view(), rng)?;
        let q = self.min_target_q(batch.next_obs.view(), next.action.view())?;
        let alpha = self.alpha();
        let gamma = self.cfg.gamma;
        Ok(ndarray::Zip::from(&batch.rewards)
            .and(&batch.done)
            .and(&q)
            .and(&next.log_prob)
            .map_collect(|&r, &d, &q, &lp| r + gamma * (1.0 - d) * (q - alpha * lp)))
    }

    /// Temperature step on `E[-alpha (log pi + H0)]` through `log alpha`.
    pub fn update_alpha<R: Rng + ?Sized>(&mut self, obs: ArrayView2<f64>, rng: &mut R) -> Result<f64, LearnError> {
        let s = self.policy.sample_batch(obs, rng)?;
        let mean_lp = s.log_prob.mean().unwrap_or(0.0);
        let loss = -self.alpha() * (mean_lp + self.cfg.target_entropy);
        self.opt_alpha.step(&mut self.log_alpha, -(mean_lp + self.cfg.target_entropy));
        Ok(loss)
    }

    /// Ascends `E[min Q(s, a) - alpha log pi(a|s)]` with reparameterized `a`.
    pub fn update_policy<R: Rng + ?Sized>(
        &mut self,
        obs: ArrayView2<f64>,
        rng: &mut R,
        diags: &mut Vec<String>,
    ) -> Result<f64, LearnError> {
        let n = obs.nrows();
        let d = self.act_dim();
        let s = self.policy.sample_batch(obs, rng)?;
        let x = concat_cols(obs, s.action.view());
        let (o1, c1) = self.q1.forward_batch(x.view())?;
        let (o2, c2) = self.q2.forward_batch(x.view())?;
        let mut up1 = Array2::zeros((n, 1));
        let mut up2 = Array2::zeros((n, 1));
        let alpha = self.alpha();
        let mut loss = 0.0;
        for i in 0..n {
            let (a, b) = (o1[[i, 0]], o2[[i, 0]]);
            if a <= b {
                up1[[i, 0]] = 1.0;
            } else {
                up2[[i, 0]] = 1.0;
            }
            loss += alpha * s.log_prob[i] - a.min(b);
        }
        let inv_n = 1.0 / n as f64;
        let g1 = self.q1.backward_input(&c1, up1.view())?;
        let g2 = self.q2.backward_input(&c2, up2.view())?;
        let dq_da = &g1.slice(s![.., -(d as isize)..]) + &g2.slice(s![.., -(d as isize)..]);
        let g_action = dq_da.mapv(|v| -v * inv_n);
        let g_lp = Array1::from_elem(n, alpha * inv_n);
        let grads = self.policy.backward_sample(&s, g_action.view(), g_lp.view())?;
        let status = self.opt_policy.step(&mut self.policy.net, &grads);
        note(diags, "policy", status);
        Ok(loss * inv_n)
    }

    pub fn soft_update_targets(&mut self) -> Result<(), LearnError> {
        self.q1_target.soft_update_from(&self.q1, self.cfg.tau)?;
        self.q2_target.soft_update_from(&self.q2, self.cfg.tau)
    }

    /// One soft actor-critic update: temperature, twin critics on the
    /// bootstrapped target, policy, then target averaging.
    pub fn sac_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<LossRecord, LearnError> {
        let mut rec = LossRecord { alpha: self.alpha(), ..Default::default() };
        if batch.is_empty() {
            rec.diagnostics.push("empty batch, update skipped".into());
            return Ok(rec);
        }
        rec.alpha_loss = self.update_alpha(batch.obs.view(), rng)?;
        let y = self.td_targets(batch, rng)?;
        let x = concat_cols(batch.obs.view(), batch.actions.view());
        let (l1, g1) = td_loss(&self.q1, x.view(), y.view())?;
        let (l2, g2) = td_loss(&self.q2, x.view(), y.view())?;
        let st = self.opt_q1.step(&mut self.q1, &g1);
        note(&mut rec.diagnostics, "critic 1", st);
        let st = self.opt_q2.step(&mut self.q2, &g2);
        note(&mut rec.diagnostics, "critic 2", st);
        rec.critic_loss = 0.5 * (l1 + l2);
        rec.policy_loss = self.update_policy(batch.obs.view(), rng, &mut rec.diagnostics)?;
        self.soft_update_targets()?;
        rec.alpha = self.alpha();
        Ok(rec)
    }

    /// Builds the proposal actions for the log-sum-exp estimate: `m`
    /// uniform actions and `m` policy actions per state, grouped by state.
    /// Returns critic inputs and proposal log-densities.
    pub fn proposals<R: Rng + ?Sized>(
        &self,
        obs: ArrayView2<f64>,
        m: usize,
        rng: &mut R,
    ) -> Result<(Array2<f64>, Array1<f64>), LearnError> {
        let (n, od) = obs.dim();
        let d = self.act_dim();
        let per = 2 * m;
        let rep = obs.select(Axis(0), &(0..n * m).map(|r| r / m).collect::<Vec<_>>());
        let pol = self.policy.sample_batch(rep.view(), rng)?;
        let mut inputs = Array2::zeros((n * per, od + d));
        let mut logq = Array1::zeros(n * per);
        let uniform_lq = -(d as f64) * std::f64::consts::LN_2;
        for i in 0..n {
            for k in 0..per {
                let row = i * per + k;
                inputs.slice_mut(s![row, ..od]).assign(&obs.row(i));
                if k < m {
                    for c in 0..d {
                        inputs[[row, od + c]] = rng.gen_range(-1.0..=1.0);
                    }
                    logq[row] = uniform_lq;
                } else {
                    let src = i * m + (k - m);
                    inputs.slice_mut(s![row, od..]).assign(&pol.action.row(src));
                    logq[row] = pol.log_prob[src];
                }
            }
        }
        Ok((inputs, logq))
    }

    /// One offline update: temperature, conservative twin critics, target
    /// averaging, then policy.
    pub fn cql_update<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        cql: &CqlConfig,
        rng: &mut R,
    ) -> Result<LossRecord, LearnError> {
        let mut rec = LossRecord { alpha: self.alpha(), ..Default::default() };
        if batch.is_empty() {
            rec.diagnostics.push("empty batch, update skipped".into());
            return Ok(rec);
        }
        rec.alpha_loss = self.update_alpha(batch.obs.view(), rng)?;
        let y = self.td_targets(batch, rng)?;
        let x = concat_cols(batch.obs.view(), batch.actions.view());
        let (props, logq) = self.proposals(batch.obs.view(), cql.num_action_samples, rng)?;
        let c1 = cql_critic_loss(&self.q1, x.view(), y.view(), props.view(), logq.view(), cql.alpha_cql)?;
        let c2 = cql_critic_loss(&self.q2, x.view(), y.view(), props.view(), logq.view(), cql.alpha_cql)?;
        let st = self.opt_q1.step(&mut self.q1, &c1.grads);
        note(&mut rec.diagnostics, "critic 1", st);
        let st = self.opt_q2.step(&mut self.q2, &c2.grads);
        note(&mut rec.diagnostics, "critic 2", st);
        rec.critic_loss = 0.5 * (c1.loss + c2.loss);
        rec.penalty = 0.5 * (c1.penalty + c2.penalty);
        self.soft_update_targets()?;
        rec.policy_loss = self.update_policy(batch.obs.view(), rng, &mut rec.diagnostics)?;
        rec.alpha = self.alpha();
        Ok(rec)
    }

    /// Mean of `Q1` over the given critic inputs.
    pub fn mean_q1(&self, inputs: ArrayView2<f64>) -> Result<f64, LearnError> {
        Ok(self.q1.predict_batch(inputs)?.mean().unwrap_or(0.0))
    }
}

/// `0.5 mean((Q - y)^2)` and its parameter gradient.
pub fn td_loss(q: &Mlp, inputs: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<(f64, Mlp), LearnError> {
    let n = inputs.nrows();
    let (out, cache) = q.forward_batch(inputs)?;
    let inv_n = 1.0 / n.max(1) as f64;
    let mut up = Array2::zeros((n, 1));
    let mut loss = 0.0;
    for i in 0..n {
        let e = out[[i, 0]] - y[i];
        loss += 0.5 * e * e;
        up[[i, 0]] = e * inv_n;
    }
    Ok((loss * inv_n, q.backward(&cache, up.view())?.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(n: usize, od: usize, rng: &mut ChaCha8Rng) -> Batch {
        Batch {
            obs: Array2::from_shape_fn((n, od), |_| rng.gen_range(-1.0..1.0)),
            actions: Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0)),
            rewards: Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0)),
            next_obs: Array2::from_shape_fn((n, od), |_| rng.gen_range(-1.0..1.0)),
            done: Array1::zeros(n),
        }
    }

    #[test]
    fn targets_start_as_exact_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = AgentLearner::new(4, 2, &LearnerConfig::default(), &mut rng);
        assert_eq!(l.q1, l.q1_target);
        assert_eq!(l.q2, l.q2_target);
        assert!((l.alpha() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn empty_batch_is_a_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut l = AgentLearner::new(4, 2, &LearnerConfig::default(), &mut rng);
        let before = l.q1.clone();
        let empty = batch(0, 4, &mut rng);
        let rec = l.sac_update(&empty, &mut rng).unwrap();
        assert_eq!(rec.diagnostics.len(), 1);
        assert_eq!(l.q1, before);
    }

    #[test]
    fn alpha_stays_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = LearnerConfig { lr_alpha: 0.01, target_entropy: -50.0, ..Default::default() };
        let mut l = AgentLearner::new(3, 2, &cfg, &mut rng);
        let obs = Array2::zeros((8, 3));
        for _ in 0..2000 {
            l.update_alpha(obs.view(), &mut rng).unwrap();
        }
        assert!(l.alpha() > 0.0 && l.alpha() < 0.01);
    }

    #[test]
    fn updates_are_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut l = AgentLearner::new(5, 2, &LearnerConfig { batch_size: 16, ..Default::default() }, &mut rng);
            let b = batch(16, 5, &mut rng);
            let mut losses = Vec::new();
            for _ in 0..5 {
                let r = l.cql_update(&b, &CqlConfig::default(), &mut rng).unwrap();
                losses.push((r.critic_loss.to_bits(), r.policy_loss.to_bits()));
            }
            losses
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn proposals_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = AgentLearner::new(3, 2, &LearnerConfig::default(), &mut rng);
        let obs = ndarray::array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let (x, lq) = l.proposals(obs.view(), 3, &mut rng).unwrap();
        assert_eq!(x.dim(), (12, 5));
        for r in 0..12 {
            assert_eq!(x.slice(s![r, ..3]), obs.row(r / 6));
            assert!(x.slice(s![r, 3..]).iter().all(|a| a.abs() <= 1.0));
        }
        assert_eq!(lq[0], -2.0 * std::f64::consts::LN_2);
        assert!(lq[3].is_finite());
    }
}
