//! Agent-facing interface of the simulator: fixed-layout observation
//! vectors with range-gated peer blocks, and decoding of policy outputs
//! into bounded physical actions.
//!
//! Observation layout for AUV `j` (all positions relative to `j` and rotated
//! into its body frame):
//!
//! | block            | width          | contents                                                      |
//! |------------------|----------------|---------------------------------------------------------------|
//! | own state        | 6              | x/S, y/S, cos h, sin h, v/v_max, energy fraction              |
//! | node slots       | 7 per slot     | rel x/S, rel y/S, dist/diag, C/C_max, N/N_max, target, held   |
//! | peers            | 6 per peer     | e·(rel x/S, rel y/S, cos Δh, sin Δh, v/v_max, hovering)      |
//! | nearest vortex   | 5              | rel x/S, rel y/S, flow x, flow y, vorticity (normalized)      |
//!
//! The first node slot holds the current target; the rest are the nearest
//! other nodes that still need collection. Empty slots are exactly zero.

use serde::{Deserialize, Serialize};

use crate::mission::{self, PriorityParams};
use crate::ocean_env::{flow_velocity, Vec2, WorldState};

/// Bumped whenever the observation layout changes.
pub const OBS_LAYOUT_VERSION: u32 = 1;

pub const OWN_WIDTH: usize = 6;
pub const NODE_WIDTH: usize = 7;
pub const PEER_WIDTH: usize = 6;
pub const VORTEX_WIDTH: usize = 5;
pub const ACTION_DIM: usize = 2;

pub fn observation_dim(num_auvs: usize, node_slots: usize) -> usize {
    OWN_WIDTH + NODE_WIDTH * node_slots + PEER_WIDTH * num_auvs.saturating_sub(1) + VORTEX_WIDTH
}

/// How peer blocks are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gating {
    /// Peers within communication range are visible.
    Range,
    /// Every peer is visible.
    Full,
    /// No peer is visible.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    pub node_slots: usize,
    pub gating: Gating,
    /// Inter-AUV communication range (m). Defaults to the sonar detection
    /// range, capped at the field diagonal.
    pub comm_range_auv: Option<f64>,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self { node_slots: 5, gating: Gating::Range, comm_range_auv: None }
    }
}

/// Normalization constants and resolved settings for observation building.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsContext {
    pub field_size: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub ang_vel_max: f64,
    pub c_max: f64,
    pub n_max: f64,
    pub energy_scale: f64,
    pub comm_range: f64,
    pub flow_scale: f64,
    pub vorticity_scale: f64,
    pub node_slots: usize,
    pub gating: Gating,
    pub priority: PriorityParams,
}

impl ObsContext {
    pub fn obs_dim(&self, num_auvs: usize) -> usize {
        observation_dim(num_auvs, self.node_slots)
    }

    pub fn field_diagonal(&self) -> f64 {
        self.field_size * std::f64::consts::SQRT_2
    }
}

/// Peer weights `e_j^k` as seen by AUV `j`; `e_j^j = 1`.
pub fn gate_weights(world: &WorldState, j: usize, ctx: &ObsContext) -> Vec<f64> {
    let me = world.auvs[j].position;
    world
        .auvs
        .iter()
        .enumerate()
        .map(|(k, other)| {
            if k == j {
                return 1.0;
            }
            match ctx.gating {
                Gating::Full => 1.0,
                Gating::Independent => 0.0,
                Gating::Range => {
                    if (other.position - me).norm() <= ctx.comm_range {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect()
}

fn to_body(rel: Vec2, heading: f64) -> (f64, f64) {
    let (s, c) = heading.sin_cos();
    (c * rel.x + s * rel.y, -s * rel.x + c * rel.y)
}

pub fn build_observation(world: &WorldState, j: usize, ctx: &ObsContext) -> Vec<f64> {
    let mut obs = Vec::with_capacity(ctx.obs_dim(world.auvs.len()));
    let me = &world.auvs[j];
    let s = ctx.field_size;

    obs.extend_from_slice(&[
        me.position.x / s,
        me.position.y / s,
        me.heading.cos(),
        me.heading.sin(),
        me.speed_cmd / ctx.v_max,
        me.energy_spent / ctx.energy_scale,
    ]);

    let mut slots: Vec<usize> = Vec::with_capacity(ctx.node_slots);
    if let Some(t) = me.target_node {
        slots.push(t);
    }
    let mut others: Vec<(f64, usize)> = world
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, n)| n.needs_collection && Some(*i) != me.target_node)
        .map(|(i, n)| ((n.position - me.position).norm_squared(), i))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    slots.extend(others.iter().map(|&(_, i)| i).take(ctx.node_slots.saturating_sub(slots.len())));
    let diag = ctx.field_diagonal();
    for k in 0..ctx.node_slots {
        match slots.get(k) {
            Some(&i) => {
                let n = &world.nodes[i];
                let rel = n.position - me.position;
                let (bx, by) = to_body(rel, me.heading);
                let held = matches!(n.occupied_by, Some(o) if o != j);
                obs.extend_from_slice(&[
                    bx / s,
                    by / s,
                    rel.norm() / diag,
                    n.stored_data / ctx.c_max,
                    n.channel_capacity / ctx.n_max,
                    if Some(i) == me.target_node { 1.0 } else { 0.0 },
                    if held { 1.0 } else { 0.0 },
                ]);
            }
            None => obs.extend_from_slice(&[0.0; NODE_WIDTH]),
        }
    }

    let gates = gate_weights(world, j, ctx);
    for (k, other) in world.auvs.iter().enumerate() {
        if k == j {
            continue;
        }
        let e = gates[k];
        let (bx, by) = to_body(other.position - me.position, me.heading);
        let dh = other.heading - me.heading;
        let block = [
            bx / s,
            by / s,
            dh.cos(),
            dh.sin(),
            other.speed_cmd / ctx.v_max,
            if other.hovering { 1.0 } else { 0.0 },
        ];
        obs.extend(block.iter().map(|x| e * x));
    }

    let nearest = world
        .vortices
        .iter()
        .min_by(|a, b| {
            (a.center() - me.position)
                .norm_squared()
                .total_cmp(&(b.center() - me.position).norm_squared())
        });
    match nearest {
        Some(v) => {
            let (bx, by) = to_body(v.center() - me.position, me.heading);
            let flow = flow_velocity(&world.vortices, me.position);
            let (fx, fy) = to_body(flow, me.heading);
            obs.extend_from_slice(&[
                bx / s,
                by / s,
                fx / ctx.flow_scale,
                fy / ctx.flow_scale,
                v.vorticity_at(me.position) / ctx.vorticity_scale,
            ]);
        }
        None => obs.extend_from_slice(&[0.0; VORTEX_WIDTH]),
    }
    obs
}

/// Physical control for one AUV.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AgentAction {
    pub accel: f64,
    pub ang_vel: f64,
    /// Target chosen by the priority rule, not by the policy.
    pub target: Option<usize>,
}

/// Maps a squashed action in `[-1, 1]^2` onto the physical bounds.
pub fn scale_action(squashed: &[f64], ctx: &ObsContext) -> (f64, f64) {
    (
        squashed[0].clamp(-1.0, 1.0) * ctx.a_max,
        squashed[1].clamp(-1.0, 1.0) * ctx.ang_vel_max,
    )
}

/// Decodes a raw (pre-squash) policy output. Returns the action and
/// whether the output had to be replaced because it was not finite.
pub fn decode_action(
    raw: &[f64],
    world: &mut WorldState,
    j: usize,
    ctx: &ObsContext,
) -> (AgentAction, bool) {
    let target = mission::ensure_target(world, j, ctx.c_max, ctx.n_max, &ctx.priority);
    if raw.len() < ACTION_DIM || raw.iter().take(ACTION_DIM).any(|x| !x.is_finite()) {
        return (AgentAction { accel: 0.0, ang_vel: 0.0, target }, true);
    }
    let squashed = [raw[0].tanh(), raw[1].tanh()];
    let (accel, ang_vel) = scale_action(&squashed, ctx);
    (AgentAction { accel, ang_vel, target }, false)
}

/// Decodes an action that is already squashed into `[-1, 1]^2`.
pub fn decode_squashed(
    squashed: &[f64],
    world: &mut WorldState,
    j: usize,
    ctx: &ObsContext,
) -> AgentAction {
    let target = mission::ensure_target(world, j, ctx.c_max, ctx.n_max, &ctx.priority);
    let (accel, ang_vel) = scale_action(squashed, ctx);
    AgentAction { accel, ang_vel, target }
}
