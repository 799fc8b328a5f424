use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{mismatch, Activation, ForwardCache, Mlp, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const ACTION_CLIP: f64 = 1.0 - 1e-6;

/// Diagonal Gaussian over pre-squash actions followed by `tanh`.
///
/// The network emits `[mean, log_std]` for every action dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub act_dim: usize,
}

/// A reparameterized batch of actions with everything needed to
/// differentiate through it.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub action: Array2<f64>,
    pub log_prob: Array1<f64>,
    noise: Array2<f64>,
    std: Array2<f64>,
    log_std_clamped: Array2<bool>,
    cache: ForwardCache,
}

/// `ln(1 - tanh(u)^2)` without cancellation.
#[inline]
fn log1m_tanh2(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - super::softplus(-2.0 * u))
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * act_dim);
        Self { net: Mlp::new(&sizes, Activation::Softplus, rng), act_dim }
    }

    pub fn from_net(net: Mlp, act_dim: usize) -> Result<Self> {
        if net.output_dim() != 2 * act_dim {
            return Err(mismatch(2 * act_dim, net.output_dim()));
        }
        Ok(Self { net, act_dim })
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn split(&self, out: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array2<bool>) {
        let d = self.act_dim;
        let mean = out.slice(ndarray::s![.., ..d]).to_owned();
        let raw = out.slice(ndarray::s![.., d..]);
        let clamped = raw.mapv(|v| !(LOG_STD_MIN..=LOG_STD_MAX).contains(&v));
        let log_std = raw.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        (mean, log_std, clamped)
    }

    /// Draws `a = tanh(mean + std * xi)` for every row of `obs`.
    pub fn sample_batch<R: Rng + ?Sized>(&self, obs: ArrayView2<f64>, rng: &mut R) -> Result<PolicySample> {
        let (out, cache) = self.net.forward_batch(obs)?;
        let (mean, log_std, log_std_clamped) = self.split(&out);
        let n = obs.nrows();
        let noise = Array2::from_shape_fn((n, self.act_dim), |_| rng.sample::<f64, _>(StandardNormal));
        let std = log_std.mapv(f64::exp);
        let pre = &mean + &(&std * &noise);
        let action = pre.mapv(f64::tanh);
        let mut log_prob = Array1::zeros(n);
        for i in 0..n {
            let mut lp = 0.0;
            for k in 0..self.act_dim {
                let xi = noise[[i, k]];
                lp += -0.5 * xi * xi - log_std[[i, k]] - HALF_LN_2PI - log1m_tanh2(pre[[i, k]]);
            }
            log_prob[i] = lp;
        }
        Ok(PolicySample { action, log_prob, noise, std, log_std_clamped, cache })
    }

    /// Parameter gradient of `sum_i (g_a[i] . a_i + g_lp[i] * log_prob_i)`
    /// for a sample drawn by [`sample_batch`](Self::sample_batch).
    pub fn backward_sample(
        &self,
        s: &PolicySample,
        g_action: ArrayView2<f64>,
        g_log_prob: ArrayView1<f64>,
    ) -> Result<Mlp> {
        let (n, d) = s.action.dim();
        if g_action.dim() != (n, d) || g_log_prob.len() != n {
            return Err(mismatch(format!("({n}, {d})"), format!("{:?}", g_action.dim())));
        }
        let mut up = Array2::zeros((n, 2 * d));
        for i in 0..n {
            for k in 0..d {
                let a = s.action[[i, k]];
                let g_pre = g_action[[i, k]] * (1.0 - a * a) + g_log_prob[i] * 2.0 * a;
                up[[i, k]] = g_pre;
                up[[i, d + k]] = if s.log_std_clamped[[i, k]] {
                    0.0
                } else {
                    g_pre * s.std[[i, k]] * s.noise[[i, k]] - g_log_prob[i]
                };
            }
        }
        Ok(self.net.backward(&s.cache, up.view())?.0)
    }

    /// Mean log-likelihood of squashed `actions` and its parameter gradient.
    /// Actions are clipped into the open interval before inversion.
    pub fn log_likelihood(&self, obs: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<(f64, Mlp)> {
        let (n, d) = (obs.nrows(), self.act_dim);
        if actions.dim() != (n, d) {
            return Err(mismatch(format!("({n}, {d})"), format!("{:?}", actions.dim())));
        }
        let (out, cache) = self.net.forward_batch(obs)?;
        let (mean, log_std, clamped) = self.split(&out);
        let mut total = 0.0;
        let mut up = Array2::zeros((n, 2 * d));
        let inv_n = 1.0 / n.max(1) as f64;
        for i in 0..n {
            for k in 0..d {
                let a = actions[[i, k]].clamp(-ACTION_CLIP, ACTION_CLIP);
                let u = a.atanh();
                let z = (u - mean[[i, k]]) * (-log_std[[i, k]]).exp();
                total += -0.5 * z * z - log_std[[i, k]] - HALF_LN_2PI - log1m_tanh2(u);
                up[[i, k]] = z * (-log_std[[i, k]]).exp() * inv_n;
                up[[i, d + k]] = if clamped[[i, k]] { 0.0 } else { (z * z - 1.0) * inv_n };
            }
        }
        Ok((total * inv_n, self.net.backward(&cache, up.view())?.0))
    }

    /// `tanh(mean)` for every row.
    pub fn deterministic_batch(&self, obs: ArrayView2<f64>) -> Result<Array2<f64>> {
        let out = self.net.predict_batch(obs)?;
        Ok(out.slice(ndarray::s![.., ..self.act_dim]).mapv(f64::tanh))
    }

    pub fn deterministic(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, obs.len()), obs).expect("row view");
        Ok(self.deterministic_batch(view)?.row(0).to_vec())
    }

    /// One stochastic squashed action.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, obs.len()), obs).expect("row view");
        Ok(self.sample_batch(view, rng)?.action.index_axis(Axis(0), 0).to_vec())
    }
}
