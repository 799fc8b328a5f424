use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustics::AcousticConfig;
use crate::algos::{LearnerConfig, OfflineConfig, OnlineConfig};
use crate::energetics::EnergyConfig;
use crate::env::SimConfig;
use crate::mdp_io::ObservationConfig;
use crate::mission::MissionConfig;
use crate::ocean_env::EnvConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

/// Expert-dataset generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub episodes: usize,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { episodes: 400, noise_sigma: 0.0, noise_seed: 0 }
    }
}

/// Evaluation and sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Episodes per evaluation during online training.
    pub online_episodes: usize,
    /// Seeds per AUV count in the sweep.
    pub sweep_seeds: usize,
    pub sweep_auvs: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { online_episodes: 1, sweep_seeds: 5, sweep_auvs: vec![1, 2, 3] }
    }
}

/// Every tunable of a run, one TOML section per module. Unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub env: EnvConfig,
    pub acoustics: AcousticConfig,
    pub energy: EnergyConfig,
    pub mission: MissionConfig,
    pub observation: ObservationConfig,
    pub learner: LearnerConfig,
    pub online: OnlineConfig,
    pub offline: OfflineConfig,
    pub dataset: DatasetConfig,
    pub eval: EvalConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            env: EnvConfig::default(),
            acoustics: AcousticConfig::default(),
            energy: EnergyConfig::default(),
            mission: MissionConfig::default(),
            observation: ObservationConfig::default(),
            learner: LearnerConfig::default(),
            online: OnlineConfig::default(),
            offline: OfflineConfig::default(),
            dataset: DatasetConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Full-scale settings scaled down to run on one laptop core: 50
    /// online episodes, 50 dataset episodes, 50 offline epochs.
    pub fn desk() -> Self {
        let mut c = Self::default();
        c.learner.batch_size = 64;
        c.online.episodes = 50;
        c.online.warmup_steps = 2000;
        c.online.update_every = 2;
        c.dataset.episodes = 50;
        c.offline.epochs = 50;
        c.offline.updates_per_epoch = 40;
        c
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            env: self.env.clone(),
            acoustics: self.acoustics.clone(),
            energy: self.energy.clone(),
            mission: self.mission.clone(),
            observation: self.observation.clone(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let e = &self.env;
        if e.num_auvs == 0 {
            return bad("env.num_auvs must be at least 1".into());
        }
        if !(e.dt > 0.0 && e.duration_s > 0.0) {
            return bad(format!("env.dt ({}) and env.duration_s ({}) must be positive", e.dt, e.duration_s));
        }
        if !(e.field_size_m > 0.0) {
            return bad(format!("env.field_size_m must be positive, got {}", e.field_size_m));
        }
        if !(0.0..=1.0).contains(&e.needing_fraction) {
            return bad(format!("env.needing_fraction must lie in [0, 1], got {}", e.needing_fraction));
        }
        if !(e.v_max > 0.0 && e.v_max <= crate::energetics::MAX_MODEL_SPEED) {
            return bad(format!("env.v_max must lie in (0, 2] m/s, got {}", e.v_max));
        }
        let l = &self.learner;
        if !(l.gamma > 0.0 && l.gamma < 1.0) {
            return bad(format!("learner.gamma must lie in (0, 1), got {}", l.gamma));
        }
        if !(0.0..=1.0).contains(&l.tau) {
            return bad(format!("learner.tau must lie in [0, 1], got {}", l.tau));
        }
        if !(l.alpha0 > 0.0) {
            return bad(format!("learner.alpha0 must be positive, got {}", l.alpha0));
        }
        if l.batch_size == 0 {
            return bad("learner.batch_size must be positive".into());
        }
        if !(self.offline.alpha_cql >= 0.0) {
            return bad(format!("offline.alpha_cql must be nonnegative, got {}", self.offline.alpha_cql));
        }
        if self.offline.num_action_samples == 0 {
            return bad("offline.num_action_samples must be positive".into());
        }
        if !(self.dataset.noise_sigma >= 0.0) {
            return bad(format!("dataset.noise_sigma must be nonnegative, got {}", self.dataset.noise_sigma));
        }
        if self.online.replay_capacity == 0 {
            return bad("online.replay_capacity must be positive".into());
        }
        Ok(())
    }
}
