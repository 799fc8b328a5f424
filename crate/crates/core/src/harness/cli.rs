//! `iout` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration or input error,
//! 3 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::experiments::{self, Stage};
use super::io;
use super::{eval_seeds, run_episode, Deterministic, EpochMetrics, Record, TrainConfig, UniformRandom};
use crate::algos::{self, AlgoError};
use crate::datasets::{inject_gaussian_noise, Dataset, DatasetError};
use crate::env::IoutEnv;
use crate::learnkit::GaussianPolicy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "iout", version, about = "Multi-AUV underwater data-collection simulator and offline MARL trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Maicql,
    Bc,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global seed; falls back to IOUT_SEED, then the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Enable or disable the vortex field.
    #[arg(long, value_enum)]
    turbulence: Option<Toggle>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train expert policies online with soft actor-critic.
    TrainOnline {
        #[command(flatten)]
        common: Common,
        /// Online training episodes.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Roll out expert checkpoints into an offline dataset.
    GenDataset {
        #[command(flatten)]
        common: Common,
        /// Expert checkpoint directory [default: <out>/online].
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        /// Episodes to record.
        #[arg(long)]
        epochs: Option<usize>,
        /// Observation noise added to the recorded dataset.
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Train offline policies from a dataset.
    TrainOffline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "maicql")]
        algo: Algo,
        /// Dataset file [default: <out>/dataset.bin].
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Observation noise injected into the loaded dataset.
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate checkpoints (uniform-random actions when none are given).
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        /// Evaluation episodes.
        #[arg(long, default_value_t = 5)]
        episodes: usize,
    },
    /// Train and evaluate the pipeline for every configured AUV count.
    SweepAuvs {
        #[command(flatten)]
        common: Common,
    },
    /// Write one episode's trajectory and the static layout.
    ExportTraj {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<AlgoError> for CliError {
    fn from(e: AlgoError) -> Self {
        match e {
            AlgoError::Dataset(DatasetError::Io(_)) | AlgoError::Io(_) => CliError::Runtime(e.to_string()),
            AlgoError::Learn(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load_config(common: &Common) -> Result<TrainConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => TrainConfig::load(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    } else if let Ok(v) = std::env::var("IOUT_SEED") {
        cfg.seed = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("IOUT_SEED must be an unsigned integer, got {v:?}")))?;
    }
    if let Some(t) = common.turbulence {
        cfg.env.turbulence = t == Toggle::On;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn ensure_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn progress_printer(stage: Stage, m: &EpochMetrics) {
    eprintln!(
        "[{}] epoch {:>4}  reward {:>10.3}  data rate {:>8.3} kbit/s  VoI {:>7.3}  crashes {}",
        stage.name(),
        m.epoch,
        m.cumulative_reward,
        m.sum_data_rate_kbps,
        m.sum_voi,
        m.crashes
    );
}

fn load_policies(dir: &Path, cfg: &TrainConfig) -> Result<Vec<GaussianPolicy>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Config(format!("checkpoint directory not found: {}", dir.display())));
    }
    let policies = algos::load_policies(dir, cfg.env.num_auvs)?;
    let od = cfg.sim().obs_dim();
    if let Some(p) = policies.iter().find(|p| p.obs_dim() != od) {
        return Err(CliError::Config(format!(
            "checkpoints in {} expect observation width {}, config has {}",
            dir.display(),
            p.obs_dim(),
            od
        )));
    }
    Ok(policies)
}

fn write_metrics(path: &Path, rows: &[EpochMetrics]) -> Result<(), CliError> {
    io::write_metrics(path, rows).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn train_online(common: &Common, epochs: Option<usize>) -> Result<(), CliError> {
    let mut cfg = load_config(common)?;
    if let Some(e) = epochs {
        cfg.online.episodes = e;
    }
    ensure_out(&common.out)?;
    let out = experiments::run_online(&cfg, cfg.seed, &mut progress_printer)?;
    algos::save_policies(&common.out.join("online"), &out.best_policies)?;
    write_metrics(&common.out.join("online_log.csv"), &out.log)
}

fn gen_dataset(common: &Common, ckpt: Option<PathBuf>, epochs: Option<usize>, sigma: Option<f64>) -> Result<(), CliError> {
    let mut cfg = load_config(common)?;
    if let Some(e) = epochs {
        cfg.dataset.episodes = e;
    }
    if let Some(s) = sigma {
        cfg.dataset.noise_sigma = s;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let dir = ckpt.unwrap_or_else(|| common.out.join("online"));
    let experts = load_policies(&dir, &cfg)?;
    ensure_out(&common.out)?;
    let data = experiments::build_dataset(&cfg, &experts, cfg.seed)?;
    let path = common.out.join("dataset.bin");
    data.save(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    eprintln!("wrote {} transitions over {} episodes to {}", data.len(), data.header.episode_count, path.display());
    Ok(())
}

fn train_offline(
    common: &Common,
    algo: Algo,
    dataset: Option<PathBuf>,
    sigma: Option<f64>,
    epochs: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = load_config(common)?;
    if let Some(e) = epochs {
        cfg.offline.epochs = e;
    }
    let path = dataset.unwrap_or_else(|| common.out.join("dataset.bin"));
    if !path.is_file() {
        return Err(CliError::Config(format!("dataset not found: {}", path.display())));
    }
    let mut data = Dataset::load(&path).map_err(|e| match e {
        DatasetError::Io(io) => CliError::Runtime(format!("{}: {io}", path.display())),
        other => CliError::Config(format!("{}: {other}", path.display())),
    })?;
    if let Some(s) = sigma {
        data = inject_gaussian_noise(&data, s, cfg.dataset.noise_seed).map_err(|e| CliError::Config(e.to_string()))?;
    }
    ensure_out(&common.out)?;
    match algo {
        Algo::Maicql => {
            let out = experiments::run_maicql(&cfg, &data, cfg.seed, &mut progress_printer)?;
            algos::save_learners(&common.out.join("maicql"), &out.learners)?;
            write_metrics(&common.out.join("maicql_log.csv"), &out.log)
        }
        Algo::Bc => {
            let out = experiments::run_bc(&cfg, &data, cfg.seed, &mut progress_printer)?;
            algos::save_policies(&common.out.join("bc"), &out.policies)?;
            write_metrics(&common.out.join("bc_log.csv"), &out.log)
        }
    }
}

/// Runs `episodes` evaluation episodes; returns per-episode metrics and the
/// first episode's trajectory and layout.
fn rollouts(
    cfg: &TrainConfig,
    ckpt: Option<&Path>,
    episodes: usize,
) -> Result<(Vec<EpochMetrics>, Vec<super::TrajectoryRow>, Vec<io::LayoutRow>), CliError> {
    let policies = match ckpt {
        Some(d) => Some(load_policies(d, cfg)?),
        None => None,
    };
    let mut env = IoutEnv::new(cfg.sim(), cfg.seed);
    let mut random = UniformRandom(ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut rows = Vec::with_capacity(episodes);
    let mut traj = Vec::new();
    let mut layout = Vec::new();
    for (i, s) in eval_seeds(cfg.seed, episodes).into_iter().enumerate() {
        let record = Record { trajectory: i == 0, transitions: false };
        let out = match &policies {
            Some(p) => run_episode(&mut env, &mut Deterministic(p), s, record),
            None => run_episode(&mut env, &mut random, s, record),
        };
        if i == 0 {
            traj = out.trajectory;
            env.reset(s);
            layout = io::layout_rows(&env.world);
        }
        let mut m = out.metrics;
        m.epoch = i;
        rows.push(m);
    }
    Ok((rows, traj, layout))
}

fn eval(common: &Common, ckpt: Option<PathBuf>, episodes: usize) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let (rows, traj, layout) = rollouts(&cfg, ckpt.as_deref(), episodes.max(1))?;
    ensure_out(&common.out)?;
    write_metrics(&common.out.join("metrics.csv"), &rows)?;
    io::write_trajectory(&common.out.join("trajectory.csv"), &traj).map_err(runtime)?;
    io::write_layout(&common.out.join("layout.csv"), &layout).map_err(runtime)?;
    let n = rows.len() as f64;
    eprintln!(
        "mean over {} episodes: reward {:.3}, data rate {:.3} kbit/s, VoI {:.3}, energy {:.1} J, crashes {}",
        rows.len(),
        rows.iter().map(|m| m.cumulative_reward).sum::<f64>() / n,
        rows.iter().map(|m| m.sum_data_rate_kbps).sum::<f64>() / n,
        rows.iter().map(|m| m.sum_voi).sum::<f64>() / n,
        rows.iter().map(|m| m.avg_energy_j).sum::<f64>() / n,
        rows.iter().map(|m| m.crashes).sum::<u64>(),
    );
    Ok(())
}

fn sweep(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    ensure_out(&common.out)?;
    let rows = experiments::sweep_auvs(&cfg, &mut |n, s, m| {
        eprint!("N={n} ");
        progress_printer(s, m);
    })?;
    io::write_sweep(&common.out.join("sweep.csv"), &rows).map_err(runtime)?;
    for r in &rows {
        eprintln!(
            "N={}: data rate {:.3} kbit/s, energy {:.1} J, crashes {:.2}",
            r.num_auvs, r.sum_data_rate_kbps, r.avg_energy_j, r.crashes
        );
    }
    Ok(())
}

fn export_traj(common: &Common, ckpt: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let (_, traj, layout) = rollouts(&cfg, ckpt.as_deref(), 1)?;
    ensure_out(&common.out)?;
    io::write_trajectory(&common.out.join("trajectory.csv"), &traj).map_err(runtime)?;
    io::write_layout(&common.out.join("layout.csv"), &layout).map_err(runtime)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::TrainOnline { common, epochs } => train_online(&common, epochs),
        Command::GenDataset { common, checkpoints, epochs, noise_sigma } => {
            gen_dataset(&common, checkpoints, epochs, noise_sigma)
        }
        Command::TrainOffline { common, algo, dataset, noise_sigma, epochs } => {
            train_offline(&common, algo, dataset, noise_sigma, epochs)
        }
        Command::Eval { common, checkpoints, episodes } => eval(&common, checkpoints, episodes),
        Command::SweepAuvs { common } => sweep(&common),
        Command::ExportTraj { common, checkpoints } => export_traj(&common, checkpoints),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                CliError::Config(m) => eprintln!("error: {m}"),
                CliError::Runtime(m) => eprintln!("error: {m}"),
            }
            e.code()
        }
    }
}
