//! CSV emitters and readers. Floats are written in shortest round-trip
//! form, so reading a file back recovers every value exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochMetrics, TrajectoryRow};
use crate::ocean_env::WorldState;

/// Bumped whenever a CSV column set changes.
pub const CSV_FORMAT_VERSION: u32 = 1;

pub const METRICS_HEADER: [&str; 11] = [
    "epoch",
    "cumulative_reward",
    "sum_data_rate_kbps",
    "sum_voi",
    "avg_energy_j",
    "crashes",
    "steps",
    "objective",
    "critic_loss",
    "policy_loss",
    "alpha",
];

pub const TRAJECTORY_HEADER: [&str; 8] = ["time", "auv_id", "x", "y", "heading", "speed", "energy", "target"];

pub const LAYOUT_HEADER: [&str; 9] =
    ["kind", "index", "x", "y", "depth", "capacity_bps", "needs_collection", "radius_m", "intensity"];

pub const SWEEP_HEADER: [&str; 7] =
    ["num_auvs", "seeds", "cumulative_reward", "sum_data_rate_kbps", "sum_voi", "avg_energy_j", "crashes"];

/// Per-agent values are `;`-joined so the column count does not depend on
/// the team size.
#[derive(Debug, Serialize, Deserialize)]
struct MetricsRecord {
    epoch: usize,
    cumulative_reward: f64,
    sum_data_rate_kbps: f64,
    sum_voi: f64,
    avg_energy_j: f64,
    crashes: u64,
    steps: usize,
    objective: f64,
    critic_loss: String,
    policy_loss: String,
    alpha: String,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn split(s: &str) -> Result<Vec<f64>, csv::Error> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|x| {
            x.parse::<f64>().map_err(|e| {
                csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{x:?}: {e}")))
            })
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, csv::Error> {
    csv::WriterBuilder::new().has_headers(false).from_path(path)
}

pub fn write_metrics(path: &Path, rows: &[EpochMetrics]) -> Result<(), csv::Error> {
    let mut w = writer(path)?;
    w.write_record(METRICS_HEADER)?;
    for m in rows {
        w.serialize(MetricsRecord {
            epoch: m.epoch,
            cumulative_reward: m.cumulative_reward,
            sum_data_rate_kbps: m.sum_data_rate_kbps,
            sum_voi: m.sum_voi,
            avg_energy_j: m.avg_energy_j,
            crashes: m.crashes,
            steps: m.steps,
            objective: m.objective,
            critic_loss: join(&m.critic_loss),
            policy_loss: join(&m.policy_loss),
            alpha: join(&m.alpha),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpochMetrics>, csv::Error> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<MetricsRecord>()
        .map(|rec| {
            let rec = rec?;
            Ok(EpochMetrics {
                epoch: rec.epoch,
                cumulative_reward: rec.cumulative_reward,
                sum_data_rate_kbps: rec.sum_data_rate_kbps,
                sum_voi: rec.sum_voi,
                avg_energy_j: rec.avg_energy_j,
                crashes: rec.crashes,
                steps: rec.steps,
                objective: rec.objective,
                critic_loss: split(&rec.critic_loss)?,
                policy_loss: split(&rec.policy_loss)?,
                alpha: split(&rec.alpha)?,
            })
        })
        .collect()
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> Result<(), csv::Error> {
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRow {
    /// `node` or `vortex`.
    pub kind: String,
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    pub capacity_bps: f64,
    pub needs_collection: bool,
    pub radius_m: f64,
    pub intensity: f64,
}

/// Node and vortex positions of a world, for plotting trajectories.
pub fn layout_rows(world: &WorldState) -> Vec<LayoutRow> {
    let nodes = world.nodes.iter().enumerate().map(|(i, n)| LayoutRow {
        kind: "node".into(),
        index: i,
        x: n.position.x,
        y: n.position.y,
        depth: n.depth,
        capacity_bps: n.channel_capacity,
        needs_collection: n.needs_collection,
        radius_m: 0.0,
        intensity: 0.0,
    });
    let vortices = world.vortices.iter().enumerate().map(|(i, v)| LayoutRow {
        kind: "vortex".into(),
        index: i,
        x: v.center[0],
        y: v.center[1],
        depth: 0.0,
        capacity_bps: 0.0,
        needs_collection: false,
        radius_m: v.radius_delta,
        intensity: v.intensity_gamma,
    });
    nodes.chain(vortices).collect()
}

pub fn write_layout(path: &Path, rows: &[LayoutRow]) -> Result<(), csv::Error> {
    let mut w = writer(path)?;
    w.write_record(LAYOUT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_layout(path: &Path) -> Result<Vec<LayoutRow>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

/// One row of the AUV-count sweep: means over seeds, crashes per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub num_auvs: usize,
    pub seeds: usize,
    pub cumulative_reward: f64,
    pub sum_data_rate_kbps: f64,
    pub sum_voi: f64,
    pub avg_energy_j: f64,
    pub crashes: f64,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), csv::Error> {
    let mut w = writer(path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}
