//! The multi-agent environment: one step couples rule-based targeting,
//! kinematics, hover/collection, energy accounting, crashes and rewards.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::acoustics::{self, AcousticConfig};
use crate::energetics::{self, EnergyConfig, MAX_MODEL_SPEED};
use crate::mdp_io::{self, AgentAction, ObsContext, ObservationConfig};
use crate::mission::{self, AuvEpisodeLog, MissionConfig, RewardComponents, StepQuantities};
use crate::ocean_env::{self, EnvConfig, StepDiagnostics, WorldState};

/// Everything the simulator needs, grouped by concern.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub env: EnvConfig,
    pub acoustics: AcousticConfig,
    pub energy: EnergyConfig,
    pub mission: MissionConfig,
    pub observation: ObservationConfig,
}

impl SimConfig {
    pub fn energy_config(&self) -> EnergyConfig {
        EnergyConfig { dt: self.env.dt, ..self.energy.clone() }
    }

    pub fn obs_context(&self) -> ObsContext {
        let comm_range = self.observation.comm_range_auv.unwrap_or_else(|| {
            acoustics::detection_range(&self.acoustics)
                .unwrap_or(0.0)
                .min(self.env.field_diagonal())
        });
        let cruise = self.env.v_max.min(MAX_MODEL_SPEED);
        let energy_scale = energetics::power_from_speed(cruise).unwrap_or(1.0) * self.env.duration_s;
        let gamma = self.env.vortex_intensity.abs().max(1e-12);
        let delta = self.env.vortex_radius_m;
        ObsContext {
            field_size: self.env.field_size_m,
            v_max: self.env.v_max,
            a_max: self.env.a_max,
            ang_vel_max: self.env.ang_vel_max,
            c_max: self.env.c_max_bits,
            n_max: self.acoustics.max_capacity_bps,
            energy_scale,
            comm_range,
            flow_scale: gamma / (2.0 * std::f64::consts::PI * delta),
            vorticity_scale: gamma / (std::f64::consts::PI * delta * delta),
            node_slots: self.observation.node_slots,
            gating: self.observation.gating,
            priority: self.mission.priority.clone(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        mdp_io::observation_dim(self.env.num_auvs, self.observation.node_slots)
    }
}

/// Per-step outcome for all agents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepResult {
    pub rewards: Vec<f64>,
    pub components: Vec<RewardComponents>,
    pub quantities: Vec<StepQuantities>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Collisions that began this step.
    pub new_crashes: usize,
    /// Every node that needed collection has been drained.
    pub terminal: bool,
    /// The time limit was reached.
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct IoutEnv {
    pub cfg: SimConfig,
    pub ctx: ObsContext,
    pub world: WorldState,
    colliding: BTreeSet<(usize, usize)>,
    /// Running per-AUV totals for the episode objective.
    pub logs: Vec<AuvEpisodeLog>,
}

impl IoutEnv {
    pub fn new(cfg: SimConfig, seed: u64) -> Self {
        let ctx = cfg.obs_context();
        let world = WorldState::new(&cfg.env, &cfg.acoustics, seed);
        let mut env = Self { cfg, ctx, world, colliding: BTreeSet::new(), logs: Vec::new() };
        env.reset(seed);
        env
    }

    pub fn num_agents(&self) -> usize {
        self.world.auvs.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.ctx.obs_dim(self.num_agents())
    }

    pub fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        self.world.reset(&self.cfg.env, seed);
        self.colliding = ocean_env::detect_collisions(&self.world.auvs, self.cfg.env.crash_distance_m)
            .into_iter()
            .collect();
        self.logs = vec![AuvEpisodeLog::default(); self.num_agents()];
        self.assign_targets();
        self.observations()
    }

    fn assign_targets(&mut self) {
        for j in 0..self.num_agents() {
            mission::ensure_target(
                &mut self.world,
                j,
                self.ctx.c_max,
                self.ctx.n_max,
                &self.ctx.priority,
            );
        }
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.num_agents())
            .map(|j| mdp_io::build_observation(&self.world, j, &self.ctx))
            .collect()
    }

    /// Decodes squashed policy actions in `[-1, 1]^2` for every agent.
    pub fn decode_all(&mut self, squashed: &[Vec<f64>]) -> Vec<AgentAction> {
        squashed
            .iter()
            .enumerate()
            .map(|(j, a)| mdp_io::decode_squashed(a, &mut self.world, j, &self.ctx))
            .collect()
    }

    /// Steps with squashed actions.
    pub fn step_squashed(&mut self, squashed: &[Vec<f64>]) -> StepResult {
        let actions = self.decode_all(squashed);
        self.step(&actions)
    }

    pub fn step(&mut self, actions: &[AgentAction]) -> StepResult {
        let n = self.num_agents();
        assert_eq!(actions.len(), n, "one action per AUV");
        let env_cfg = &self.cfg.env.clone();
        let energy_cfg = self.cfg.energy_config();
        let limits = env_cfg.limits();
        let dt = env_cfg.dt;
        let t_end = self.world.time + dt;

        let mut quantities = vec![StepQuantities::default(); n];
        let mut diagnostics = vec![StepDiagnostics::default(); n];

        for j in 0..n {
            let auv = &self.world.auvs[j];
            let idle = auv.target_node.is_none();
            let (next, energy) = if auv.hovering || idle {
                let mut held = auv.clone();
                held.speed_cmd = 0.0;
                (held, energetics::step_energy(0.0, true, &energy_cfg).unwrap_or(0.0))
            } else {
                let (next, diag) = ocean_env::step_kinematics(
                    auv,
                    (actions[j].accel, actions[j].ang_vel),
                    &limits,
                    &self.world.vortices,
                );
                diagnostics[j] = diag;
                let v = next.speed_cmd.min(MAX_MODEL_SPEED);
                (next, energetics::step_energy(v, false, &energy_cfg).unwrap_or(0.0))
            };
            self.world.auvs[j] = next;
            self.world.auvs[j].energy_spent += energy;
            quantities[j].energy_j = energy;
        }

        // hover entry
        for j in 0..n {
            let auv = &self.world.auvs[j];
            let Some(i) = auv.target_node else { continue };
            if auv.hovering {
                continue;
            }
            let node = &self.world.nodes[i];
            if node.needs_collection
                && (node.position - auv.position).norm() <= env_cfg.comm_distance_m
            {
                let auv = &mut self.world.auvs[j];
                auv.hovering = true;
                auv.speed_cmd = 0.0;
                let node = &mut self.world.nodes[i];
                node.collection_start_time = Some(self.world.time);
                node.collection_backlog = node.stored_data;
                self.logs[j].capacity_sum += node.channel_capacity;
            }
        }

        let report = ocean_env::step_nodes(&mut self.world, env_cfg, dt);
        for j in 0..n {
            quantities[j].bits = report.bits_by_auv[j];
            if let Some((i, share)) = report.drained_share[j] {
                let v = mission::voi(&self.world.nodes[i], t_end, &self.cfg.mission.voi);
                quantities[j].voi = v * share;
            }
        }

        self.world.time = t_end;
        self.world.step += 1;
        self.assign_targets();

        let pairs: BTreeSet<(usize, usize)> =
            ocean_env::detect_collisions(&self.world.auvs, env_cfg.crash_distance_m)
                .into_iter()
                .collect();
        let new_crashes = pairs.difference(&self.colliding).count();
        self.colliding = pairs;

        let mut rewards = Vec::with_capacity(n);
        let mut components = Vec::with_capacity(n);
        for j in 0..n {
            let (r, c) = mission::step_reward(
                &self.world,
                j,
                &quantities[j],
                &self.cfg.mission.reward,
                env_cfg.crash_distance_m,
            );
            rewards.push(r);
            components.push(c);
            let log = &mut self.logs[j];
            log.data_bits += quantities[j].bits;
            log.voi_sum += quantities[j].voi;
            log.energy_j += quantities[j].energy_j;
        }

        StepResult {
            rewards,
            components,
            quantities,
            diagnostics,
            new_crashes,
            terminal: self.world.needing_remaining() == 0,
            truncated: self.world.step >= env_cfg.max_steps(),
        }
    }
}
