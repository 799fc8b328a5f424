//! Collection priority, value-of-information bookkeeping, hover
//! assignment, per-step reward shaping and the episode objective.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ocean_env::{NodeState, Vec2, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MissionError {
    #[error("channel capacity is zero; collection time is unbounded")]
    ZeroCapacity,
    #[error("mean travel speed must be positive, got {0} m/s")]
    NonPositiveSpeed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorityParams {
    /// Distance penalty per metre.
    pub xi: f64,
    pub epsilon: f64,
}

impl Default for PriorityParams {
    fn default() -> Self {
        Self { xi: 0.005, epsilon: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoiParams {
    pub beta: f64,
    /// Decay time scale (s).
    pub sigma: f64,
}

impl Default for VoiParams {
    fn default() -> Self {
        Self { beta: 0.7, sigma: 10.0 }
    }
}

/// Weights of the per-step reward. Energy and collision terms are
/// penalties and carry negative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_ec: f64,
    pub w_voi: f64,
    pub w_dr: f64,
    pub w_dp: f64,
    pub w_cs: f64,
    /// Distance below which the proximity bonus applies (m).
    pub d_r: f64,
    pub o: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { w_ec: -0.001, w_voi: 1.0, w_dr: 2e-6, w_dp: 1.0, w_cs: -5.0, d_r: 20.0, o: 0.1 }
    }
}

/// Contribution factors of the episode objective, each in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub data: f64,
    pub capacity: f64,
    pub voi: f64,
    pub energy: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self { data: 0.5, capacity: 0.1, voi: 0.3, energy: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    pub priority: PriorityParams,
    pub voi: VoiParams,
    pub reward: RewardWeights,
    pub objective: ObjectiveWeights,
}

/// Collection priority of `node` for an AUV at `auv_pos`.
///
/// Capacity is normalized by `n_max` so the storage ratio is dimensionless.
pub fn priority(node: &NodeState, auv_pos: Vec2, c_max: f64, n_max: f64, params: &PriorityParams) -> f64 {
    let n = node.channel_capacity / n_max;
    let d = (node.position - auv_pos).norm();
    node.stored_data / (c_max * (n + params.epsilon)) - params.xi * d
}

/// Picks the highest-priority needing node that no other AUV holds and
/// claims it. Ties go to the lowest index. Returns `None` when nothing is
/// available, in which case the AUV idles.
pub fn select_target(
    world: &mut WorldState,
    auv_index: usize,
    c_max: f64,
    n_max: f64,
    params: &PriorityParams,
) -> Option<usize> {
    let pos = world.auvs[auv_index].position;
    let mut best: Option<(usize, f64)> = None;
    for (i, node) in world.nodes.iter().enumerate() {
        if !node.needs_collection {
            continue;
        }
        if matches!(node.occupied_by, Some(other) if other != auv_index) {
            continue;
        }
        let p = priority(node, pos, c_max, n_max, params);
        if best.map_or(true, |(_, bp)| p > bp) {
            best = Some((i, p));
        }
    }
    release_target(world, auv_index);
    let (i, _) = best?;
    world.nodes[i].occupied_by = Some(auv_index);
    world.auvs[auv_index].target_node = Some(i);
    Some(i)
}

/// Drops the AUV's claim on its current target, if any.
pub fn release_target(world: &mut WorldState, auv_index: usize) {
    if let Some(i) = world.auvs[auv_index].target_node.take() {
        if world.nodes[i].occupied_by == Some(auv_index) {
            world.nodes[i].occupied_by = None;
        }
    }
    world.auvs[auv_index].hovering = false;
}

/// Keeps a valid target for the AUV, reselecting when the current one is
/// absent or no longer needs collection.
pub fn ensure_target(
    world: &mut WorldState,
    auv_index: usize,
    c_max: f64,
    n_max: f64,
    params: &PriorityParams,
) -> Option<usize> {
    if let Some(i) = world.auvs[auv_index].target_node {
        let node = &world.nodes[i];
        if node.needs_collection && node.occupied_by == Some(auv_index) {
            return Some(i);
        }
    }
    select_target(world, auv_index, c_max, n_max, params)
}

/// Binary AUV × node assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMatrix {
    pub chi: Vec<Vec<bool>>,
}

impl AssignmentMatrix {
    /// Hover assignments currently in force.
    pub fn hovering(world: &WorldState) -> Self {
        let mut chi = vec![vec![false; world.nodes.len()]; world.auvs.len()];
        for (j, auv) in world.auvs.iter().enumerate() {
            if let (true, Some(i)) = (auv.hovering, auv.target_node) {
                chi[j][i] = true;
            }
        }
        Self { chi }
    }

    /// Target claims currently in force.
    pub fn claims(world: &WorldState) -> Self {
        let mut chi = vec![vec![false; world.nodes.len()]; world.auvs.len()];
        for (i, node) in world.nodes.iter().enumerate() {
            if let Some(j) = node.occupied_by {
                chi[j][i] = true;
            }
        }
        Self { chi }
    }

    /// At most one AUV per node and one node per AUV.
    pub fn is_valid(&self) -> bool {
        let rows_ok = self.chi.iter().all(|row| row.iter().filter(|&&x| x).count() <= 1);
        let cols = self.chi.first().map_or(0, |r| r.len());
        let cols_ok = (0..cols).all(|i| self.chi.iter().filter(|row| row[i]).count() <= 1);
        rows_ok && cols_ok
    }
}

/// `beta V + (1 - beta) V exp(-elapsed / sigma)`, written with `expm1` so
/// that zero elapsed time returns `V` exactly.
fn decayed(initial_voi: f64, elapsed: f64, params: &VoiParams) -> f64 {
    initial_voi * (1.0 + (1.0 - params.beta) * (-elapsed / params.sigma).exp_m1())
}

/// VoI of a node at time `t`, given its collection start time.
pub fn voi_at(initial_voi: f64, start: Option<f64>, t: f64, params: &VoiParams) -> f64 {
    match start {
        Some(t0) if t >= t0 => decayed(initial_voi, t - t0, params),
        _ => 0.0,
    }
}

pub fn voi(node: &NodeState, t: f64, params: &VoiParams) -> f64 {
    voi_at(node.initial_voi, node.collection_start_time, t, params)
}

/// Result of the hand-over VoI update between consecutive collections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoiUpdate {
    pub value: f64,
    pub collect_time: f64,
    pub travel_time: f64,
    /// Start time of the next collection, `T + t_c + t_m`.
    pub next_start: f64,
}

/// VoI of a node when its AUV starts collecting at the next node.
///
/// `backlog_bits / capacity_bps` is the collection time and
/// `distance_m / mean_speed` the travel time to the next node.
pub fn voi_update(
    initial_voi: f64,
    start: f64,
    backlog_bits: f64,
    capacity_bps: f64,
    distance_m: f64,
    mean_speed: f64,
    params: &VoiParams,
) -> Result<VoiUpdate, MissionError> {
    if !(capacity_bps > 0.0) {
        return Err(MissionError::ZeroCapacity);
    }
    if !(mean_speed > 0.0) {
        return Err(MissionError::NonPositiveSpeed(mean_speed));
    }
    let collect_time = backlog_bits / capacity_bps;
    let travel_time = distance_m / mean_speed;
    let elapsed = collect_time + travel_time;
    let value = decayed(initial_voi, elapsed, params);
    Ok(VoiUpdate { value, collect_time, travel_time, next_start: start + elapsed })
}

/// What one AUV did during a step, as measured by the simulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepQuantities {
    pub energy_j: f64,
    pub bits: f64,
    pub voi: f64,
}

/// Unweighted reward terms, kept for logging.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardComponents {
    pub ec: f64,
    pub voi: f64,
    pub dr: f64,
    pub dp: f64,
    pub cs: f64,
}

impl RewardComponents {
    pub fn weighted(&self, w: &RewardWeights) -> f64 {
        w.w_ec * self.ec + w.w_voi * self.voi + w.w_dr * self.dr + w.w_dp * self.dp + w.w_cs * self.cs
    }
}

/// Proximity bonus toward the target node.
pub fn proximity_reward(distance: f64, d_r: f64, o: f64) -> f64 {
    if distance <= d_r {
        1.0 / (distance + o)
    } else {
        0.0
    }
}

/// Collision term: mean over peers of `1 - min(d, d_s)/d_s`, zero once every
/// peer is at least `d_s` away.
pub fn collision_term(world: &WorldState, auv_index: usize, d_s: f64) -> f64 {
    let n = world.auvs.len();
    if n < 2 {
        return 0.0;
    }
    let me = world.auvs[auv_index].position;
    let sum: f64 = world
        .auvs
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != auv_index)
        .map(|(_, other)| 1.0 - (other.position - me).norm().min(d_s) / d_s)
        .sum();
    sum / (n - 1) as f64
}

pub fn step_reward(
    world: &WorldState,
    auv_index: usize,
    step: &StepQuantities,
    weights: &RewardWeights,
    d_s: f64,
) -> (f64, RewardComponents) {
    let auv = &world.auvs[auv_index];
    let dp = auv.target_node.map_or(0.0, |i| {
        proximity_reward((world.nodes[i].position - auv.position).norm(), weights.d_r, weights.o)
    });
    let c = RewardComponents {
        ec: step.energy_j,
        voi: step.voi,
        dr: step.bits,
        dp,
        cs: collision_term(world, auv_index, d_s),
    };
    (c.weighted(weights), c)
}

/// Per-AUV totals accumulated over an episode.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AuvEpisodeLog {
    pub data_bits: f64,
    /// Sum of node channel capacities over hover events (bits/s).
    pub capacity_sum: f64,
    pub voi_sum: f64,
    pub energy_j: f64,
}

pub fn episode_objective(logs: &[AuvEpisodeLog], w: &ObjectiveWeights) -> f64 {
    logs.iter()
        .map(|l| w.data * l.data_bits + w.capacity * l.capacity_sum + w.voi * l.voi_sum - w.energy * l.energy_j)
        .sum()
}
