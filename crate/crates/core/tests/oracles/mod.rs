//! Independent reference implementations used only by the integration
//! tests. None of these call the code path they check.

#![allow(dead_code)]

use std::fmt;

/// Comparison of an oracle value against the artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: f64,
    pub artifact: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    /// Whether `tolerance` bounds the relative (true) or absolute error.
    pub relative: bool,
    pub pass: bool,
}

impl OracleReport {
    fn build(quantity: &str, oracle: f64, artifact: f64, tolerance: f64, relative: bool) -> Self {
        let abs_error = (oracle - artifact).abs();
        let rel_error = if oracle == 0.0 { abs_error } else { abs_error / oracle.abs() };
        let err = if relative { rel_error } else { abs_error };
        Self {
            quantity: quantity.to_string(),
            oracle,
            artifact,
            abs_error,
            rel_error,
            tolerance,
            relative,
            pass: err <= tolerance,
        }
    }

    pub fn abs(quantity: &str, oracle: f64, artifact: f64, tolerance: f64) -> Self {
        Self::build(quantity, oracle, artifact, tolerance, false)
    }

    pub fn rel(quantity: &str, oracle: f64, artifact: f64, tolerance: f64) -> Self {
        Self::build(quantity, oracle, artifact, tolerance, true)
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: oracle {:.9} artifact {:.9} abs {:.3e} rel {:.3e} tol {:.1e} ({})",
            if self.pass { "ok" } else { "MISMATCH" },
            self.quantity,
            self.oracle,
            self.artifact,
            self.abs_error,
            self.rel_error,
            self.tolerance,
            if self.relative { "rel" } else { "abs" }
        )
    }
}

/// Thorp absorption in dB/km, summed term by term.
pub fn thorp_terms(f_khz: f64) -> f64 {
    let f2 = f_khz.powi(2);
    let low = 0.11 * f2 / (1.0 + f2);
    let mid = 44.0 * f2 / (4100.0 + f2);
    let high = 2.75e-4 * f2;
    low + mid + high + 0.003
}

fn echo_excess_direct(budget: f64, d: f64, f_khz: f64) -> f64 {
    let tl = 20.0 * d.log10() + d * thorp_terms(f_khz) / 1000.0;
    budget - 2.0 * tl
}

/// First range at which the echo excess changes sign, found by a linear
/// scan from 1 m.
pub fn grid_scan_detection_range(budget: f64, f_khz: f64, step: f64) -> Result<f64, String> {
    assert!(step > 0.0 && step <= 0.1, "step must lie in (0, 0.1]");
    let mut d = 1.0;
    let mut prev = echo_excess_direct(budget, d, f_khz);
    if prev <= 0.0 {
        return Err(format!("no detection: echo excess {prev} dB at 1 m"));
    }
    for k in 1..100_000_000u64 {
        d = 1.0 + k as f64 * step;
        let cur = echo_excess_direct(budget, d, f_khz);
        if cur <= 0.0 {
            // interpolate inside the bracketing cell
            return Ok(d - step * cur / (cur - prev));
        }
        prev = cur;
    }
    Err("no sign change within scan range".into())
}

/// Efficiency polynomial evaluated in Horner form.
fn eta(v: f64) -> f64 {
    ((-0.081 * v + 0.215) * v - 0.01) * v + 0.541
}

/// Both roots of `a P^2 + b P + c = 0` by the cancellation-free pair of
/// formulas.
pub fn stable_quadratic_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
    let disc = b * b - 4.0 * a * c;
    assert!(disc >= 0.0, "complex roots");
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    (q / a, c / q)
}

/// Positive propulsion power at speed `v` from the closed-form root.
pub fn quadratic_root_oracle(v: f64) -> f64 {
    assert!(v > 0.0 && v <= 2.0);
    let (r1, r2) = stable_quadratic_roots(-0.0021, 0.6342 - eta(v) / v, 2.8372);
    assert!(r1 * r2 < 0.0, "expected one root of each sign");
    r1.max(r2)
}

/// Central finite-difference gradient of `loss` with respect to `params`.
pub fn finite_difference_grad(mut loss: impl FnMut(&[f64]) -> f64, params: &[f64], h: f64) -> Vec<f64> {
    assert!((1e-6..=1e-4).contains(&h));
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let x = p[i];
            p[i] = x + h;
            let up = loss(&p);
            p[i] = x - h;
            let down = loss(&p);
            p[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest elementwise relative error, with magnitudes below `floor`
/// compared absolutely.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Finite MDP with an offline dataset and a fixed evaluation policy.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub states: usize,
    pub actions: usize,
    /// `(s, a, r, s', done)`
    pub data: Vec<(usize, usize, f64, usize, bool)>,
    /// `policy[s][a]`, the distribution backing the TD target.
    pub policy: Vec<Vec<f64>>,
    pub gamma: f64,
}

/// Plain gradient descent on the tabular conservative objective
///
/// `alpha * mean_i [ln sum_a exp Q(s_i, a) - Q(s_i, a_i)] + 0.5 mean_i (Q(s_i, a_i) - y_i)^2`
///
/// where `y_i = r_i + gamma (1 - done_i) sum_a' pi(a'|s'_i) Q(s'_i, a')` is
/// held fixed within each step. Returns `Q[s][a]`.
pub fn tabular_cql_oracle(mdp: &TabularMdp, alpha: f64, lr: f64, steps: usize) -> Vec<Vec<f64>> {
    assert!(mdp.states <= 4 && mdp.actions <= 3);
    let mut q = vec![vec![0.0; mdp.actions]; mdp.states];
    let n = mdp.data.len() as f64;
    for _ in 0..steps {
        let mut g = vec![vec![0.0; mdp.actions]; mdp.states];
        for &(s, a, r, s2, done) in &mdp.data {
            let v_next: f64 = if done {
                0.0
            } else {
                (0..mdp.actions).map(|b| mdp.policy[s2][b] * q[s2][b]).sum()
            };
            let y = r + mdp.gamma * v_next;
            g[s][a] += (q[s][a] - y) / n;
            let m = q[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = q[s].iter().map(|v| (v - m).exp()).sum();
            for b in 0..mdp.actions {
                g[s][b] += alpha * (q[s][b] - m).exp() / z / n;
            }
            g[s][a] -= alpha / n;
        }
        for s in 0..mdp.states {
            for a in 0..mdp.actions {
                q[s][a] -= lr * g[s][a];
            }
        }
    }
    q
}

/// Exact discounted value of the two-state chain with reward `r` on every
/// step and no termination.
pub fn geometric_value(r: f64, gamma: f64) -> f64 {
    r / (1.0 - gamma)
}
