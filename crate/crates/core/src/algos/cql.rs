use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::learnkit::{mismatch_error, LearnError, Mlp};

/// Value and parameter gradient of the conservative critic objective.
#[derive(Debug, Clone)]
pub struct CqlLoss {
    pub loss: f64,
    /// `mean_s [logsumexp_k (Q(s, a_k) - log q(a_k)) - Q(s, a_data)]`,
    /// before scaling by `alpha_cql`.
    pub penalty: f64,
    /// `0.5 mean (Q(s, a_data) - y)^2`.
    pub td: f64,
    pub grads: Mlp,
}

/// Conservative critic objective
///
/// `alpha_cql * mean_s [LSE_k (Q(s, a_k) - log q_k) - Q(s, a)] + 0.5 mean (Q(s, a) - y)^2`
///
/// for any critic. `data_inputs` holds one `(s, a)` row per transition and
/// `targets` the bootstrapped TD targets. `proposal_inputs` holds `K` rows
/// per state, grouped by state in the order of `data_inputs`, with the
/// log-density of each proposal action in `proposal_log_density`. With a
/// finite action set, passing every action once with log-density zero makes
/// the log-sum-exp exact.
pub fn cql_critic_loss(
    q: &Mlp,
    data_inputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    proposal_inputs: ArrayView2<f64>,
    proposal_log_density: ArrayView1<f64>,
    alpha_cql: f64,
) -> Result<CqlLoss, LearnError> {
    let n = data_inputs.nrows();
    if targets.len() != n {
        return Err(mismatch_error(n, targets.len()));
    }
    if proposal_log_density.len() != proposal_inputs.nrows() {
        return Err(mismatch_error(proposal_inputs.nrows(), proposal_log_density.len()));
    }
    if n == 0 {
        return Ok(CqlLoss { loss: 0.0, penalty: 0.0, td: 0.0, grads: q.zeros_like() });
    }
    let total = proposal_inputs.nrows();
    if total % n != 0 {
        return Err(mismatch_error(format!("a multiple of {n} proposal rows"), total));
    }
    let k = total / n;
    let inv_n = 1.0 / n as f64;

    let (qd, data_cache) = q.forward_batch(data_inputs)?;
    let mut up_data = Array2::zeros((n, 1));
    let mut td = 0.0;
    let mut data_mean = 0.0;
    for i in 0..n {
        let e = qd[[i, 0]] - targets[i];
        td += 0.5 * e * e;
        data_mean += qd[[i, 0]];
        up_data[[i, 0]] = (e - alpha_cql) * inv_n;
    }
    td *= inv_n;
    data_mean *= inv_n;
    let (mut grads, _) = q.backward(&data_cache, up_data.view())?;

    let mut lse_mean = 0.0;
    if k > 0 {
        let (qp, prop_cache) = q.forward_batch(proposal_inputs)?;
        let mut up_prop = Array2::zeros((total, 1));
        for i in 0..n {
            let rows = i * k..(i + 1) * k;
            let z: Vec<f64> = rows.clone().map(|r| qp[[r, 0]] - proposal_log_density[r]).collect();
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|v| (v - m).exp()).sum();
            lse_mean += m + sum.ln();
            for (r, v) in rows.zip(&z) {
                up_prop[[r, 0]] = alpha_cql * inv_n * (v - m).exp() / sum;
            }
        }
        lse_mean *= inv_n;
        let (gp, _) = q.backward(&prop_cache, up_prop.view())?;
        grads.axpy(1.0, &gp)?;
    }
    let penalty = if k > 0 { lse_mean - data_mean } else { 0.0 };
    Ok(CqlLoss { loss: alpha_cql * penalty + td, penalty, td, grads })
}
