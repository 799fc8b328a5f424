//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and a
//! summary line. With `IOUT_ACCEPTANCE_STRICT=1` it also exits nonzero when
//! any hard criterion fails.

mod oracles;
mod support;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use iout_core::acoustics::{thorp_absorption, transmission_loss};
use iout_core::datasets::{inject_gaussian_noise, Dataset};
use iout_core::energetics::{efficiency_from_speed, power_from_speed};
use iout_core::harness::{experiments, io, TrainConfig};
use iout_core::mission::{voi_at, voi_update, VoiParams};
use iout_core::ocean_env::{flow_velocity, Vortex};
use nalgebra::Vector2;
use oracles::{geometric_value, quadratic_root_oracle, tabular_cql_oracle, thorp_terms, OracleReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    soft: bool,
    detail: String,
    elapsed: Duration,
}

struct Run {
    verdicts: Vec<Verdict>,
}

impl Run {
    fn check(&mut self, id: u32, name: &'static str, soft: bool, f: impl FnOnce() -> (bool, String)) {
        let t = Instant::now();
        let (pass, detail) = f();
        let v = Verdict { id, name, pass, soft, detail, elapsed: t.elapsed() };
        println!(
            "{} [{}] {}{} ({:.1}s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.id,
            v.name,
            if v.soft { " (soft)" } else { "" },
            v.elapsed.as_secs_f64(),
            v.detail
        );
        self.verdicts.push(v);
    }
}

fn reports(rs: &[OracleReport]) -> (bool, String) {
    let pass = rs.iter().all(|r| r.pass);
    let worst = rs.iter().filter(|r| !r.pass).map(|r| r.to_string()).collect::<Vec<_>>();
    let detail = if pass { format!("{} comparisons within tolerance", rs.len()) } else { worst.join("; ") };
    (pass, detail)
}

fn physics() -> (bool, String) {
    let p2 = power_from_speed(2.0).unwrap();
    reports(&[
        OracleReport::rel("thorp(20)", thorp_terms(20.0), thorp_absorption(20.0).unwrap(), 1e-6),
        OracleReport::rel("thorp(20) printed", 4.133837, thorp_absorption(20.0).unwrap(), 1e-6),
        OracleReport::rel("TL(1000, 20)", 64.133837, transmission_loss(1000.0, 20.0).unwrap(), 1e-6),
        OracleReport::abs("eta(2)", 0.733, efficiency_from_speed(2.0).unwrap(), 1e-12),
        OracleReport::abs("P(2) vs quadratic root", quadratic_root_oracle(2.0), p2, 0.05),
        OracleReport::abs("P(2) printed", 137.315, p2, 0.05),
    ])
}

fn random_vortex(rng: &mut ChaCha8Rng) -> Vortex {
    let c = Vector2::new(rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0));
    Vortex::new(c, rng.gen_range(1.0..100.0), rng.gen_range(-20.0..20.0))
}

fn flow() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut superposed = true;
    for _ in 0..10_000 {
        let (v, w) = (random_vortex(&mut rng), random_vortex(&mut rng));
        let p = Vector2::new(rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0));
        let rel = p - v.center();
        let u = flow_velocity(&[v], p);
        let scale = u.norm() * rel.norm();
        if scale > 0.0 {
            worst = worst.max(u.dot(&rel).abs() / scale);
        }
        superposed &= flow_velocity(&[v, w], p) == flow_velocity(&[v], p) + flow_velocity(&[w], p);
    }
    let v = Vortex::new(Vector2::new(3.0, -4.0), 48.0, 8.0);
    let core = OracleReport::rel("vorticity(core)", 8.0 / (PI * 48.0 * 48.0), v.vorticity_at(v.center()), 1e-9);
    let pass = worst <= 1e-12 && core.pass && superposed;
    (pass, format!("max |v.(p-c)|/(|v||p-c|) {worst:.2e}; {core}; superposition exact {superposed}"))
}

fn voi() -> (bool, String) {
    let p = VoiParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut at_start = true;
    let mut worst_update: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..1000 {
        let v0 = rng.gen_range(0.01..10.0);
        let t0 = rng.gen_range(0.0..500.0);
        at_start &= voi_at(v0, Some(t0), t0, &p) == v0;
        let u = voi_update(
            v0,
            t0,
            rng.gen_range(0.0..2.0e6),
            rng.gen_range(1.0..1.0e6),
            rng.gen_range(0.0..200.0),
            rng.gen_range(0.1..2.0),
            &p,
        )
        .unwrap();
        let direct = voi_at(v0, Some(t0), t0 + u.collect_time + u.travel_time, &p);
        worst_update = worst_update.max((u.value - direct).abs() / direct.abs());
        let q = VoiParams { beta: rng.gen_range(0.0..=1.0), sigma: rng.gen_range(0.1..100.0) };
        let t = rng.gen_range(0.0..500.0);
        let dt = rng.gen_range(0.0..50.0);
        monotone &= voi_at(v0, Some(0.0), t + dt, &q) <= voi_at(v0, Some(0.0), t, &q);
    }
    let pass = at_start && worst_update <= 1e-12 && monotone;
    (pass, format!("voi(T)=V exact {at_start}; update rel err {worst_update:.2e}; monotone {monotone}"))
}

fn gradients() -> (bool, String) {
    let nets = (0..20).map(support::random_net_grad_error).fold(0.0, f64::max);
    let cql = [0.0, 1.0, 5.0].iter().map(|&a| support::cql_loss_grad_error(a)).fold(0.0, f64::max);
    (nets <= 1e-4 && cql <= 1e-3, format!("20 nets max rel err {nets:.2e} (tol 1e-4); CQL loss {cql:.2e} (tol 1e-3)"))
}

fn conservatism() -> (bool, String) {
    let mdp = support::cycle_mdp();
    let mut rs = Vec::new();
    for alpha in [0.0, 0.1, 1.0, 10.0] {
        let oracle = tabular_cql_oracle(&mdp, alpha, 0.5, 4000);
        let artifact = support::artifact_tabular(&mdp, alpha, 0.5, 4000);
        for s in 0..3 {
            for a in 0..3 {
                rs.push(OracleReport::abs(&format!("Q({s},{a}) a={alpha}"), oracle[s][a], artifact[s][a], 1e-3));
            }
        }
    }
    let (match_ok, detail) = reports(&rs);
    let gaps: Vec<f64> =
        [0.1, 1.0, 10.0].iter().map(|&a| support::covered_gap(&support::artifact_tabular(&mdp, a, 0.5, 4000))).collect();
    let below = gaps[0] > 0.0;
    let monotone = gaps.windows(2).all(|w| w[1] > w[0]);
    (match_ok && below && monotone, format!("{detail}; covered-uncovered gaps {gaps:.4?}"))
}

fn sac() -> (bool, String) {
    let expected = geometric_value(1.0, 0.9);
    let values = support::sac_chain_values();
    let worst = values.iter().map(|v| (v - expected).abs()).fold(0.0, f64::max);
    let up = support::temperature_trace(50.0, 500);
    let down = support::temperature_trace(-50.0, 500);
    let up_ok = up.windows(2).all(|w| w[1] > w[0]);
    let down_ok = down.windows(2).all(|w| w[1] < w[0]);
    (
        worst <= 0.5 && up_ok && down_ok,
        format!(
            "max |Q-10| {worst:.3}; alpha {:.4}->{:.4} (H0 50), {:.4}->{:.4} (H0 -50)",
            up[0],
            up[500],
            down[0],
            down[500]
        ),
    )
}

fn beats_baseline(trained: f64, baseline: f64) -> bool {
    trained >= baseline + 0.25 * baseline.abs()
}

struct Desk {
    cfg: TrainConfig,
    clean: Dataset,
    baseline: f64,
}

fn audit() -> (bool, String) {
    let bad: Vec<_> = support::defaults_audit().into_iter().filter(|(_, w, g)| w != g).collect();
    (bad.is_empty(), format!("{} fields audited, mismatches {bad:?}", support::defaults_audit().len()))
}

fn determinism(desk: &Desk) -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = desk.cfg.clone();
    cfg.offline.epochs = 3;
    let mut small = Dataset::new(desk.clean.header.clone());
    for t in desk.clean.transitions.iter().take(2000) {
        small.push(t.clone());
    }
    let noisy = |s| inject_gaussian_noise(&small, 0.1, s).unwrap();
    let mut files = Vec::new();
    for k in 0..2 {
        let d = dir.path().join(format!("d{k}.bin"));
        noisy(11).save(&d).unwrap();
        let out = experiments::run_maicql(&cfg, &noisy(11), 5, &mut |_, _| {}).unwrap();
        let m = dir.path().join(format!("m{k}.csv"));
        io::write_metrics(&m, &out.log).unwrap();
        files.push((std::fs::read(d).unwrap(), std::fs::read(m).unwrap()));
    }
    let same_data = files[0].0 == files[1].0;
    let same_metrics = files[0].1 == files[1].1;
    let full = dir.path().join("full.bin");
    desk.clean.save(&full).unwrap();
    let back = Dataset::load(&full).unwrap();
    let resaved = dir.path().join("resaved.bin");
    back.save(&resaved).unwrap();
    let exact = back.transitions.len() == desk.clean.transitions.len()
        && back.transitions.iter().zip(&desk.clean.transitions).all(|(a, b)| {
            let bits = |x: &[f32], y: &[f32]| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
            bits(&a.obs, &b.obs)
                && bits(&a.next_obs, &b.next_obs)
                && bits(&a.actions, &b.actions)
                && bits(&a.rewards, &b.rewards)
                && a.done == b.done
                && a.episode_end == b.episode_end
        })
        && std::fs::read(&full).unwrap() == std::fs::read(&resaved).unwrap();
    let (audit_ok, audit_detail) = audit();
    (
        same_data && same_metrics && exact && audit_ok,
        format!(
            "dataset bytes identical {same_data}; metrics bytes identical {same_metrics}; round trip bit-exact {exact}; {audit_detail}"
        ),
    )
}

fn main() {
    let mut run = Run { verdicts: Vec::new() };
    run.check(1, "physics golden values", false, physics);
    run.check(2, "flow-field invariants", false, flow);
    run.check(3, "VoI identities", false, voi);
    run.check(4, "gradient correctness", false, gradients);
    run.check(5, "tabular conservatism", false, conservatism);
    run.check(6, "SAC sanity", false, sac);

    let cfg = TrainConfig::desk();
    let baseline = experiments::uniform_baseline(&cfg, cfg.seed).cumulative_reward;
    let mut desk = None;
    run.check(7, "desk pipeline beats random by 25%", false, || {
        let t = Instant::now();
        let out = experiments::pipeline(&cfg, &mut |_, _| {}).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let ma = experiments::moving_average_reward(&out.maicql.log, 10);
        let pass = beats_baseline(ma, baseline) && secs <= 15.0 * 60.0;
        // the desk preset records a noise-free dataset
        let clean = out.dataset;
        desk = Some(Desk { cfg: cfg.clone(), clean, baseline });
        (pass, format!("final 10-epoch mean {ma:.2} vs random {baseline:.2} (needs >= {:.2}); {secs:.0}s of 900s", baseline + 0.25 * baseline.abs()))
    });
    let desk = desk.expect("desk pipeline ran");

    run.check(8, "noise robustness", false, || {
        let mut parts = Vec::new();
        let mut pass = true;
        for sigma in [0.01, 0.1] {
            let data = inject_gaussian_noise(&desk.clean, sigma, desk.cfg.dataset.noise_seed).unwrap();
            let out = experiments::run_maicql(&desk.cfg, &data, desk.cfg.seed, &mut |_, _| {}).unwrap();
            let ma = experiments::moving_average_reward(&out.log, 10);
            pass &= beats_baseline(ma, desk.baseline);
            parts.push(format!("sigma {sigma}: {ma:.2}"));
        }
        (pass, format!("{} vs random {:.2}", parts.join(", "), desk.baseline))
    });

    run.check(9, "AUV-count sweep trend", false, || {
        let t = Instant::now();
        let rows = experiments::sweep_auvs(&TrainConfig::desk(), &mut |_, _, _| {}).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let rate: Vec<f64> = rows.iter().map(|r| r.sum_data_rate_kbps).collect();
        let crashes: Vec<f64> = rows.iter().map(|r| r.crashes).collect();
        let pass = rate.windows(2).all(|w| w[1] > w[0]) && crashes.windows(2).all(|w| w[1] >= w[0]) && secs <= 30.0 * 60.0;
        (pass, format!("N=1,2,3 data rate {rate:.3?} kbit/s, crashes {crashes:.2?}; {secs:.0}s of 1800s"))
    });

    run.check(10, "determinism and persistence", false, || determinism(&desk));

    run.check(11, "BC recovers a linear teacher", false, || {
        let mae = support::bc_teacher_mae();
        (mae <= 0.05, format!("held-out MAE {mae:.4} (tol 0.05)"))
    });
    run.check(11, "MAICQL final reward >= BC", true, || {
        let data = inject_gaussian_noise(&desk.clean, desk.cfg.dataset.noise_sigma, desk.cfg.dataset.noise_seed).unwrap();
        let mut pairs = Vec::new();
        for seed in 0..3 {
            let m = experiments::run_maicql(&desk.cfg, &data, seed, &mut |_, _| {}).unwrap();
            let b = experiments::run_bc(&desk.cfg, &data, seed, &mut |_, _| {}).unwrap();
            pairs.push((m.log.last().unwrap().cumulative_reward, b.log.last().unwrap().cumulative_reward));
        }
        let wins = pairs.iter().filter(|(m, b)| m >= b).count();
        let mean = |f: fn(&(f64, f64)) -> f64| pairs.iter().map(f).sum::<f64>() / 3.0;
        let (mq, bc) = (mean(|p| p.0), mean(|p| p.1));
        (mq >= bc, format!("mean MAICQL {mq:.2} vs BC {bc:.2}; MAICQL >= BC on {wins}/3 seeds {pairs:.2?}"))
    });

    let hard_fail = run.verdicts.iter().filter(|v| !v.pass && !v.soft).count();
    let soft_fail = run.verdicts.iter().filter(|v| !v.pass && v.soft).count();
    println!(
        "acceptance: {} passed, {hard_fail} failed, {soft_fail} soft checks missed",
        run.verdicts.iter().filter(|v| v.pass).count()
    );
    let strict = std::env::var("IOUT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if hard_fail > 0 && strict {
        std::process::exit(1);
    }
}
