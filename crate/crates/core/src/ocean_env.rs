//! Planar ocean world: Lamb–Oseen vortex currents, AUV kinematics under
//! current interference, IoUT node data dynamics and collision geometry.
//!
//! The simulation is two-dimensional at a fixed sailing depth. Node depth
//! only enters the acoustic slant range used for link capacity.

use std::f64::consts::PI;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acoustics::{self, AcousticConfig};

pub type Vec2 = Vector2<f64>;

/// A viscous (Lamb–Oseen) vortex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vortex {
    pub center: [f64; 2],
    pub radius_delta: f64,
    pub intensity_gamma: f64,
}

impl Vortex {
    pub fn new(center: Vec2, radius_delta: f64, intensity_gamma: f64) -> Self {
        assert!(radius_delta > 0.0, "vortex radius must be positive");
        Self { center: [center.x, center.y], radius_delta, intensity_gamma }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.center[0], self.center[1])
    }

    /// Induced velocity at `p`. The core is a removable singularity and
    /// evaluates to zero.
    pub fn velocity_at(&self, p: Vec2) -> Vec2 {
        let dx = p.x - self.center[0];
        let dy = p.y - self.center[1];
        let r2 = dx * dx + dy * dy;
        if r2 < 1e-24 {
            return Vec2::zeros();
        }
        let d2 = self.radius_delta * self.radius_delta;
        let k = self.intensity_gamma / (2.0 * PI * r2) * (-(-r2 / d2).exp_m1());
        Vec2::new(-k * dy, k * dx)
    }

    pub fn vorticity_at(&self, p: Vec2) -> f64 {
        let r2 = (p - self.center()).norm_squared();
        let d2 = self.radius_delta * self.radius_delta;
        self.intensity_gamma / (PI * d2) * (-r2 / d2).exp()
    }
}

/// Superposed current velocity (m/s) at `p`.
pub fn flow_velocity(vortices: &[Vortex], p: Vec2) -> Vec2 {
    vortices.iter().fold(Vec2::zeros(), |acc, v| acc + v.velocity_at(p))
}

pub fn vorticity(vortex: &Vortex, p: Vec2) -> f64 {
    vortex.vorticity_at(p)
}

/// Velocity of an AUV commanding `v_cmd` at `p`, relative to the current.
pub fn relative_velocity(v_cmd: Vec2, p: Vec2, vortices: &[Vortex]) -> Vec2 {
    v_cmd - flow_velocity(vortices, p)
}

pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = theta - two_pi * ((theta + PI) / two_pi).floor();
    if w <= -PI {
        w += two_pi;
    }
    if w > PI {
        w -= two_pi;
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuvState {
    pub position: Vec2,
    pub heading: f64,
    pub speed_cmd: f64,
    pub energy_spent: f64,
    pub target_node: Option<usize>,
    pub hovering: bool,
}

impl AuvState {
    pub fn at(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            heading: wrap_angle(heading),
            speed_cmd: 0.0,
            energy_spent: 0.0,
            target_node: None,
            hovering: false,
        }
    }

    pub fn commanded_velocity(&self) -> Vec2 {
        Vec2::new(self.heading.cos(), self.heading.sin()) * self.speed_cmd
    }
}

/// Bounds used when integrating one kinematic step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicLimits {
    pub v_max: f64,
    pub a_max: f64,
    pub ang_vel_max: f64,
    pub field_size: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepDiagnostics {
    pub accel_clamped: bool,
    pub ang_vel_clamped: bool,
    pub hit_boundary: bool,
}

/// One explicit-Euler step of the AUV under `(accel, ang_vel)`.
pub fn step_kinematics(
    auv: &AuvState,
    action: (f64, f64),
    limits: &KinematicLimits,
    vortices: &[Vortex],
) -> (AuvState, StepDiagnostics) {
    let mut diag = StepDiagnostics::default();
    let (mut accel, mut ang_vel) = action;
    if accel.abs() > limits.a_max {
        accel = accel.clamp(-limits.a_max, limits.a_max);
        diag.accel_clamped = true;
    }
    if ang_vel.abs() > limits.ang_vel_max {
        ang_vel = ang_vel.clamp(-limits.ang_vel_max, limits.ang_vel_max);
        diag.ang_vel_clamped = true;
    }
    let mut next = auv.clone();
    next.heading = wrap_angle(auv.heading + ang_vel * limits.dt);
    next.speed_cmd = (auv.speed_cmd + accel * limits.dt).clamp(0.0, limits.v_max);
    let ground = relative_velocity(next.commanded_velocity(), auv.position, vortices);
    let raw = auv.position + ground * limits.dt;
    let clamped = Vec2::new(
        raw.x.clamp(0.0, limits.field_size),
        raw.y.clamp(0.0, limits.field_size),
    );
    diag.hit_boundary = clamped != raw;
    next.position = clamped;
    (next, diag)
}

/// Unordered index pairs closer than `d_s`.
pub fn detect_collisions(auvs: &[AuvState], d_s: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..auvs.len() {
        for j in i + 1..auvs.len() {
            if (auvs[i].position - auvs[j].position).norm() < d_s {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub position: Vec2,
    /// Depth below the surface (negative, m).
    pub depth: f64,
    pub stored_data: f64,
    pub channel_capacity: f64,
    pub initial_voi: f64,
    pub collection_start_time: Option<f64>,
    /// Backlog when the current collection started; VoI is credited in
    /// proportion to the share of it drained each step.
    pub collection_backlog: f64,
    pub needs_collection: bool,
    pub occupied_by: Option<usize>,
}

/// Scenario parameters for the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub field_size_m: f64,
    pub num_devices: usize,
    pub water_depth_m: f64,
    pub num_auvs: usize,
    pub sailing_depth_m: f64,
    pub comm_distance_m: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub ang_vel_max: f64,
    pub vortex_intensity: f64,
    pub vortex_radius_m: f64,
    pub num_vortices: usize,
    pub turbulence: bool,
    /// Explicit vortex layout; generated from `layout_seed` when empty.
    pub vortices: Vec<Vortex>,
    pub duration_s: f64,
    pub dt: f64,
    pub c_max_bits: f64,
    pub crash_distance_m: f64,
    pub needing_fraction: f64,
    pub arrival_rate_bps: f64,
    pub initial_voi_min: f64,
    pub initial_voi_max: f64,
    pub layout_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            field_size_m: 120.0,
            num_devices: 55,
            water_depth_m: -50.0,
            num_auvs: 2,
            sailing_depth_m: -10.0,
            comm_distance_m: 6.0,
            v_max: 2.0,
            a_max: 0.5,
            ang_vel_max: PI / 4.0,
            vortex_intensity: 8.0,
            vortex_radius_m: 48.0,
            num_vortices: 3,
            turbulence: true,
            vortices: Vec::new(),
            duration_s: 1000.0,
            dt: 1.0,
            c_max_bits: 2.0e6,
            crash_distance_m: 5.0,
            needing_fraction: 0.4,
            arrival_rate_bps: 1000.0,
            initial_voi_min: 0.5,
            initial_voi_max: 1.0,
            layout_seed: 2024,
        }
    }
}

impl EnvConfig {
    pub fn limits(&self) -> KinematicLimits {
        KinematicLimits {
            v_max: self.v_max,
            a_max: self.a_max,
            ang_vel_max: self.ang_vel_max,
            field_size: self.field_size_m,
            dt: self.dt,
        }
    }

    pub fn max_steps(&self) -> usize {
        (self.duration_s / self.dt).round() as usize
    }

    pub fn num_needing(&self) -> usize {
        ((self.num_devices as f64) * self.needing_fraction).round() as usize
    }

    pub fn field_diagonal(&self) -> f64 {
        self.field_size_m * std::f64::consts::SQRT_2
    }
}

/// Static deployment: node positions and depths plus the vortex set.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub node_positions: Vec<Vec2>,
    pub node_depths: Vec<f64>,
    pub vortices: Vec<Vortex>,
}

impl Layout {
    pub fn generate(cfg: &EnvConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.layout_seed);
        let margin = 5.0_f64.min(cfg.field_size_m / 4.0);
        let span = cfg.field_size_m - 2.0 * margin;
        let node_positions = (0..cfg.num_devices)
            .map(|_| Vec2::new(margin + span * rng.gen::<f64>(), margin + span * rng.gen::<f64>()))
            .collect();
        let deep = cfg.water_depth_m;
        let shallow = cfg.water_depth_m / 2.0;
        let node_depths = (0..cfg.num_devices)
            .map(|_| deep + (shallow - deep) * rng.gen::<f64>())
            .collect();
        let vortices = if !cfg.vortices.is_empty() {
            cfg.vortices.clone()
        } else {
            (0..cfg.num_vortices)
                .map(|_| {
                    let c = Vec2::new(
                        cfg.field_size_m * rng.gen::<f64>(),
                        cfg.field_size_m * rng.gen::<f64>(),
                    );
                    Vortex::new(c, cfg.vortex_radius_m, cfg.vortex_intensity)
                })
                .collect()
        };
        Self { node_positions, node_depths, vortices }
    }
}

/// Full simulation snapshot.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub time: f64,
    pub step: usize,
    pub auvs: Vec<AuvState>,
    pub nodes: Vec<NodeState>,
    /// Active vortices; empty when turbulence is off.
    pub vortices: Vec<Vortex>,
    pub rng: ChaCha8Rng,
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time
            && self.step == other.step
            && self.auvs == other.auvs
            && self.nodes == other.nodes
            && self.vortices == other.vortices
    }
}

impl WorldState {
    /// Builds the world from the static layout and resets the episode state
    /// with `seed`.
    pub fn new(cfg: &EnvConfig, acoustic: &AcousticConfig, seed: u64) -> Self {
        let layout = Layout::generate(cfg);
        let vortices = if cfg.turbulence { layout.vortices.clone() } else { Vec::new() };
        let nodes = layout
            .node_positions
            .iter()
            .zip(&layout.node_depths)
            .map(|(&position, &depth)| {
                let slant = (cfg.comm_distance_m.powi(2)
                    + (depth - cfg.sailing_depth_m).powi(2))
                .sqrt()
                .max(1.0);
                let channel_capacity =
                    acoustics::channel_capacity(slant, acoustic).unwrap_or(0.0);
                NodeState {
                    position,
                    depth,
                    stored_data: 0.0,
                    channel_capacity,
                    initial_voi: 1.0,
                    collection_start_time: None,
                    collection_backlog: 0.0,
                    needs_collection: false,
                    occupied_by: None,
                }
            })
            .collect();
        let mut world = Self {
            time: 0.0,
            step: 0,
            auvs: Vec::new(),
            nodes,
            vortices,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        world.reset(cfg, seed);
        world
    }

    /// Resets AUV poses and node data states; the layout is kept.
    pub fn reset(&mut self, cfg: &EnvConfig, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.time = 0.0;
        self.step = 0;
        let rng = &mut self.rng;

        let n = self.nodes.len();
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let needing = cfg.num_needing().min(n);
        for node in &mut self.nodes {
            node.needs_collection = false;
            node.stored_data = 0.2 * cfg.c_max_bits * rng.gen::<f64>();
            node.initial_voi =
                cfg.initial_voi_min + (cfg.initial_voi_max - cfg.initial_voi_min) * rng.gen::<f64>();
            node.collection_start_time = None;
            node.collection_backlog = 0.0;
            node.occupied_by = None;
        }
        for &i in order.iter().take(needing) {
            let node = &mut self.nodes[i];
            node.needs_collection = true;
            node.stored_data = cfg.c_max_bits * (0.25 + 0.75 * rng.gen::<f64>());
        }

        let margin = 5.0_f64.min(cfg.field_size_m / 4.0);
        let span = cfg.field_size_m - 2.0 * margin;
        let mut auvs: Vec<AuvState> = Vec::with_capacity(cfg.num_auvs);
        for _ in 0..cfg.num_auvs {
            let mut pos = Vec2::zeros();
            for _attempt in 0..100 {
                pos = Vec2::new(margin + span * rng.gen::<f64>(), margin + span * rng.gen::<f64>());
                if auvs.iter().all(|a| (a.position - pos).norm() >= 2.0 * cfg.crash_distance_m) {
                    break;
                }
            }
            let heading = rng.gen_range(-PI..PI);
            auvs.push(AuvState::at(pos, heading));
        }
        self.auvs = auvs;
    }

    pub fn needing_remaining(&self) -> usize {
        self.nodes.iter().filter(|n| n.needs_collection).count()
    }

    pub fn total_backlog(&self) -> f64 {
        self.nodes.iter().filter(|n| n.needs_collection).map(|n| n.stored_data).sum()
    }
}

/// Data moved during one node update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeStepReport {
    /// Bits drained by each AUV this step.
    pub bits_by_auv: Vec<f64>,
    /// Fraction of its collection backlog each AUV drained, with the node index.
    pub drained_share: Vec<Option<(usize, f64)>>,
    /// `(auv, node)` collections that finished this step.
    pub completed: Vec<(usize, usize)>,
}

/// Advances node buffers by `dt`.
///
/// Hovered nodes drain at their channel capacity; other nodes that still
/// need collection accrue data at `arrival_rate_bps`, capped at `c_max`.
/// A drained node stops needing collection and releases its AUV.
pub fn step_nodes(world: &mut WorldState, cfg: &EnvConfig, dt: f64) -> NodeStepReport {
    let mut report = NodeStepReport {
        bits_by_auv: vec![0.0; world.auvs.len()],
        drained_share: vec![None; world.auvs.len()],
        completed: Vec::new(),
    };
    let mut drained = vec![false; world.nodes.len()];
    for (j, auv) in world.auvs.iter_mut().enumerate() {
        let Some(i) = auv.target_node else { continue };
        if !auv.hovering {
            continue;
        }
        let node = &mut world.nodes[i];
        if (auv.position - node.position).norm() > cfg.comm_distance_m + 1e-9 {
            continue;
        }
        drained[i] = true;
        let bits = node.stored_data.min(node.channel_capacity * dt).max(0.0);
        node.stored_data -= bits;
        report.bits_by_auv[j] += bits;
        if node.collection_backlog > 0.0 {
            report.drained_share[j] = Some((i, bits / node.collection_backlog));
        }
        if node.stored_data <= 0.0 {
            node.stored_data = 0.0;
            node.needs_collection = false;
            node.occupied_by = None;
            auv.hovering = false;
            auv.target_node = None;
            report.completed.push((j, i));
        }
    }
    for (i, node) in world.nodes.iter_mut().enumerate() {
        if node.needs_collection && !drained[i] {
            node.stored_data = (node.stored_data + cfg.arrival_rate_bps * dt).min(cfg.c_max_bits);
        }
    }
    report
}
