mod oracles;
mod support;

use iout_core::algos::{AgentLearner, CqlConfig, LearnerConfig};
use iout_core::datasets::Batch;
use ndarray::{Array1, Array2, Axis};
use oracles::{geometric_value, tabular_cql_oracle, OracleReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{artifact_tabular, bc_teacher_mae, covered_gap, cycle_mdp, sac_chain_values, temperature_trace};

#[test]
fn tabular_descent_matches_oracle() {
    let mdp = cycle_mdp();
    for alpha in [0.0, 0.1, 1.0, 10.0] {
        let oracle = tabular_cql_oracle(&mdp, alpha, 0.5, 4000);
        let artifact = artifact_tabular(&mdp, alpha, 0.5, 4000);
        for s in 0..3 {
            for a in 0..3 {
                let r = OracleReport::abs(&format!("Q({s},{a}) alpha {alpha}"), oracle[s][a], artifact[s][a], 1e-3);
                assert!(r.pass, "{r}");
            }
        }
    }
}

#[test]
fn penalty_off_is_policy_evaluation() {
    let mdp = cycle_mdp();
    let q = tabular_cql_oracle(&mdp, 0.0, 0.5, 20000);
    // Q(s, 0) = r(s) + gamma Q(s + 1, 0) around the cycle
    for &(s, _, r, s2, _) in &mdp.data {
        assert!((q[s][0] - r - 0.9 * q[s2][0]).abs() < 1e-9);
    }
}

#[test]
fn uncovered_actions_fall_below_covered_and_gap_grows_with_alpha() {
    let mdp = cycle_mdp();
    let gaps: Vec<f64> = [0.1, 1.0, 10.0].iter().map(|&a| covered_gap(&artifact_tabular(&mdp, a, 0.5, 4000))).collect();
    assert!(gaps[0] > 0.0, "{gaps:?}");
    assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
}

#[test]
fn sac_critic_converges_on_two_state_chain() {
    let expected = geometric_value(1.0, 0.9);
    for v in sac_chain_values() {
        assert!((v - expected).abs() <= 0.5, "Q = {v}");
    }
}

#[test]
fn temperature_moves_toward_target_entropy() {
    for (h0, up) in [(50.0, true), (-50.0, false)] {
        let trace = temperature_trace(h0, 500);
        assert!(trace.iter().all(|&a| a > 0.0));
        assert!(trace.windows(2).all(|w| if up { w[1] > w[0] } else { w[1] < w[0] }), "H0 {h0}");
    }
}

#[test]
fn bc_recovers_linear_teacher() {
    let mae = bc_teacher_mae();
    assert!(mae <= 0.05, "MAE {mae}");
}

#[test]
fn conservative_critic_values_random_actions_lower() {
    let (od, n) = (4, 256);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let obs = Array2::from_shape_fn((n, od), |_| rng.gen_range(-1.0..1.0));
    let actions = Array2::from_shape_fn((n, 2), |_| 0.5 + rng.gen_range(-0.05..0.05));
    let batch = Batch {
        next_obs: Array2::from_shape_fn((n, od), |_| rng.gen_range(-1.0..1.0)),
        rewards: obs.map_axis(Axis(1), |r| r[0] - 0.5 * r[1]),
        done: Array1::zeros(n),
        obs: obs.clone(),
        actions,
    };
    let cfg = LearnerConfig { hidden: vec![32, 32], lr: 1e-3, batch_size: n, ..Default::default() };
    let train = |alpha_cql: f64| {
        let mut init = ChaCha8Rng::seed_from_u64(5);
        let mut l = AgentLearner::new(od, 2, &cfg, &mut init);
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let c = CqlConfig { alpha_cql, num_action_samples: 10 };
        for _ in 0..300 {
            l.cql_update(&batch, &c, &mut r).unwrap();
        }
        l
    };
    let cons = train(1.0);
    let plain = train(0.0);
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let random = Array2::from_shape_fn((n, 2), |_| r.gen_range(-1.0..1.0));
    let x = iout_core::learnkit::concat_cols(obs.view(), random.view());
    let (qc, qp) = (cons.mean_q1(x.view()).unwrap(), plain.mean_q1(x.view()).unwrap());
    assert!(qc < qp, "conservative {qc} vs plain {qp}");
}
