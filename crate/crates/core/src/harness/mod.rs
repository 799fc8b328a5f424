//! Configuration, episode rollouts, metric and trajectory files,
//! experiment drivers and the command-line front end.

pub mod cli;
mod config;
mod episode;
pub mod experiments;
pub mod io;

pub use config::{ConfigError, DatasetConfig, EvalConfig, TrainConfig};
pub use episode::{
    evaluate, run_episode, Controller, Deterministic, EpisodeOutcome, EpochMetrics, Record, Stochastic,
    TrajectoryRow, UniformRandom, ZeroAction,
};

/// Mixes a base seed, a stream tag and an index into an independent seed
/// (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reset seeds of the evaluation episodes for a run seeded with `seed`.
pub fn eval_seeds(seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| derive_seed(seed, 0xE7A1, i)).collect()
}
