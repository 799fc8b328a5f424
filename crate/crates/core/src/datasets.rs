//! Joint multi-agent transitions, the replay buffer, the offline dataset
//! file format and observation-noise injection.
//!
//! A dataset file is a fixed 112-byte little-endian header followed by one
//! length-prefixed record per transition:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 8    | magic `IOUTDSET`                       |
//! | 8      | 4    | format version                         |
//! | 12     | 4    | observation layout version             |
//! | 16     | 4    | number of agents                       |
//! | 20     | 4    | observation width per agent            |
//! | 24     | 4    | action width per agent                 |
//! | 28     | 4    | reserved (zero)                        |
//! | 32     | 8    | episode count                          |
//! | 40     | 8    | transition count                       |
//! | 48     | 32   | SHA-256 fingerprint of the sim config  |
//! | 80     | 8    | generation seed                        |
//! | 88     | 8    | injected noise sigma (`f64`)           |
//! | 96     | 8    | noise seed                             |
//! | 104    | 8    | reserved (zero)                        |
//!
//! Each record is a `u32` byte length, a `u32` flag word (bit 0: terminal,
//! bit 1: last transition of its episode), then `f32` observations,
//! actions, rewards and next observations for all agents in agent order.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rand::SeedableRng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::SimConfig;
use crate::mdp_io::{ACTION_DIM, OBS_LAYOUT_VERSION};

pub const DATASET_MAGIC: &[u8; 8] = b"IOUTDSET";
pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 112;
/// Table 1 replay capacity.
pub const REPLAY_CAPACITY: usize = 80_000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("dataset format version {found} is not supported (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error("dataset observation layout version {found} does not match this build's version {expected}")]
    LayoutVersion { found: u32, expected: u32 },
    #[error("dataset truncated: {0}")]
    Truncated(String),
    #[error("dataset corrupt: {0}")]
    Corrupt(String),
    #[error("dataset does not match config: {0}")]
    Incompatible(String),
    #[error("noise sigma must be nonnegative, got {0}")]
    NegativeSigma(f64),
    #[error("cannot sample from an empty buffer")]
    EmptyBuffer,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// One joint step of all agents. Vectors are agent-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    pub actions: Vec<f32>,
    pub rewards: Vec<f32>,
    pub next_obs: Vec<f32>,
    /// The episode ended in a terminal state (no bootstrapping).
    pub done: bool,
    /// Last transition of its episode, terminal or truncated.
    pub episode_end: bool,
}

impl Transition {
    pub fn from_f64(
        obs: &[Vec<f64>],
        actions: &[Vec<f64>],
        rewards: &[f64],
        next_obs: &[Vec<f64>],
        done: bool,
        episode_end: bool,
    ) -> Self {
        let flat = |v: &[Vec<f64>]| v.iter().flatten().map(|&x| x as f32).collect::<Vec<f32>>();
        Self {
            obs: flat(obs),
            actions: flat(actions),
            rewards: rewards.iter().map(|&r| r as f32).collect(),
            next_obs: flat(next_obs),
            done,
            episode_end,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.obs
            .iter()
            .chain(&self.actions)
            .chain(&self.rewards)
            .chain(&self.next_obs)
            .all(|x| x.is_finite())
    }
}

/// Per-agent minibatch in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    /// 1.0 for terminal transitions.
    pub done: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Slices agent `j`'s view out of joint transitions.
    pub fn for_agent(items: &[&Transition], j: usize, obs_dim: usize, act_dim: usize) -> Self {
        let n = items.len();
        let mut b = Batch {
            obs: Array2::zeros((n, obs_dim)),
            actions: Array2::zeros((n, act_dim)),
            rewards: Array1::zeros(n),
            next_obs: Array2::zeros((n, obs_dim)),
            done: Array1::zeros(n),
        };
        for (i, t) in items.iter().enumerate() {
            let o = &t.obs[j * obs_dim..(j + 1) * obs_dim];
            let no = &t.next_obs[j * obs_dim..(j + 1) * obs_dim];
            let a = &t.actions[j * act_dim..(j + 1) * act_dim];
            for k in 0..obs_dim {
                b.obs[[i, k]] = o[k] as f64;
                b.next_obs[[i, k]] = no[k] as f64;
            }
            for k in 0..act_dim {
                b.actions[[i, k]] = a[k] as f64;
            }
            b.rewards[i] = t.rewards[j] as f64;
            b.done[i] = if t.done { 1.0 } else { 0.0 };
        }
        b
    }
}

/// FIFO replay memory with uniform sampling with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: VecDeque::with_capacity(capacity.min(1 << 16)), capacity }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&T>> {
        if self.items.is_empty() {
            return Err(DatasetError::EmptyBuffer);
        }
        Ok((0..batch_size).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub layout_version: u32,
    pub num_agents: u32,
    pub obs_dim: u32,
    pub act_dim: u32,
    pub episode_count: u64,
    pub transition_count: u64,
    pub fingerprint: [u8; 32],
    pub seed: u64,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl DatasetHeader {
    pub fn for_config(cfg: &SimConfig, seed: u64) -> Self {
        Self {
            format_version: DATASET_FORMAT_VERSION,
            layout_version: OBS_LAYOUT_VERSION,
            num_agents: cfg.env.num_auvs as u32,
            obs_dim: cfg.obs_dim() as u32,
            act_dim: ACTION_DIM as u32,
            episode_count: 0,
            transition_count: 0,
            fingerprint: config_fingerprint(cfg),
            seed,
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }

    fn record_floats(&self) -> usize {
        let n = self.num_agents as usize;
        n * (2 * self.obs_dim as usize + self.act_dim as usize + 1)
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..8].copy_from_slice(DATASET_MAGIC);
        h[8..12].copy_from_slice(&self.format_version.to_le_bytes());
        h[12..16].copy_from_slice(&self.layout_version.to_le_bytes());
        h[16..20].copy_from_slice(&self.num_agents.to_le_bytes());
        h[20..24].copy_from_slice(&self.obs_dim.to_le_bytes());
        h[24..28].copy_from_slice(&self.act_dim.to_le_bytes());
        h[32..40].copy_from_slice(&self.episode_count.to_le_bytes());
        h[40..48].copy_from_slice(&self.transition_count.to_le_bytes());
        h[48..80].copy_from_slice(&self.fingerprint);
        h[80..88].copy_from_slice(&self.seed.to_le_bytes());
        h[88..96].copy_from_slice(&self.noise_sigma.to_le_bytes());
        h[96..104].copy_from_slice(&self.noise_seed.to_le_bytes());
        h
    }

    fn decode(h: &[u8; HEADER_LEN]) -> Result<Self> {
        if &h[0..8] != DATASET_MAGIC {
            return Err(DatasetError::BadMagic);
        }
        let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(h[o..o + 8].try_into().expect("8 bytes"));
        let format_version = u32_at(8);
        if format_version != DATASET_FORMAT_VERSION {
            return Err(DatasetError::FormatVersion { found: format_version, expected: DATASET_FORMAT_VERSION });
        }
        let layout_version = u32_at(12);
        if layout_version != OBS_LAYOUT_VERSION {
            return Err(DatasetError::LayoutVersion { found: layout_version, expected: OBS_LAYOUT_VERSION });
        }
        Ok(Self {
            format_version,
            layout_version,
            num_agents: u32_at(16),
            obs_dim: u32_at(20),
            act_dim: u32_at(24),
            episode_count: u64_at(32),
            transition_count: u64_at(40),
            fingerprint: h[48..80].try_into().expect("32 bytes"),
            seed: u64_at(80),
            noise_sigma: f64::from_le_bytes(h[88..96].try_into().expect("8 bytes")),
            noise_seed: u64_at(96),
        })
    }
}

/// SHA-256 of the canonical TOML rendering of a simulator config.
pub fn config_fingerprint(cfg: &SimConfig) -> [u8; 32] {
    let text = toml::to_string(cfg).expect("sim config serializes");
    Sha256::digest(text.as_bytes()).into()
}

pub fn fingerprint_hex(fp: &[u8; 32]) -> String {
    fp.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub transitions: Vec<Transition>,
}

impl Dataset {
    pub fn new(header: DatasetHeader) -> Self {
        Self { header, transitions: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if t.episode_end {
            self.header.episode_count += 1;
        }
        self.transitions.push(t);
        self.header.transition_count = self.transitions.len() as u64;
    }

    pub fn obs_dim(&self) -> usize {
        self.header.obs_dim as usize
    }

    pub fn act_dim(&self) -> usize {
        self.header.act_dim as usize
    }

    pub fn num_agents(&self) -> usize {
        self.header.num_agents as usize
    }

    /// Uniform minibatch (with replacement) for agent `j`.
    pub fn sample_agent<R: Rng + ?Sized>(&self, j: usize, batch_size: usize, rng: &mut R) -> Result<Batch> {
        if self.transitions.is_empty() {
            return Err(DatasetError::EmptyBuffer);
        }
        let items: Vec<&Transition> = (0..batch_size)
            .map(|_| &self.transitions[rng.gen_range(0..self.transitions.len())])
            .collect();
        Ok(Batch::for_agent(&items, j, self.obs_dim(), self.act_dim()))
    }

    /// Refuses a dataset whose shape or layout differs from `cfg`.
    pub fn check_compatible(&self, cfg: &SimConfig) -> Result<()> {
        let h = &self.header;
        let mut diffs = Vec::new();
        if h.layout_version != OBS_LAYOUT_VERSION {
            diffs.push(format!("layout version {} vs {}", h.layout_version, OBS_LAYOUT_VERSION));
        }
        if h.num_agents as usize != cfg.env.num_auvs {
            diffs.push(format!("agents {} vs {}", h.num_agents, cfg.env.num_auvs));
        }
        if h.obs_dim as usize != cfg.obs_dim() {
            diffs.push(format!("observation width {} vs {}", h.obs_dim, cfg.obs_dim()));
        }
        if h.act_dim as usize != ACTION_DIM {
            diffs.push(format!("action width {} vs {}", h.act_dim, ACTION_DIM));
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::Incompatible(format!("dataset vs config: {}", diffs.join(", "))))
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut header = self.header.clone();
        header.transition_count = self.transitions.len() as u64;
        w.write_all(&header.encode())?;
        let floats = header.record_floats();
        for t in &self.transitions {
            let n = t.obs.len() + t.actions.len() + t.rewards.len() + t.next_obs.len();
            if n != floats {
                return Err(DatasetError::Corrupt(format!("record has {n} values, header implies {floats}")));
            }
            w.write_all(&((4 + 4 * n) as u32).to_le_bytes())?;
            let flags = u32::from(t.done) | (u32::from(t.episode_end) << 1);
            w.write_all(&flags.to_le_bytes())?;
            for x in t.obs.iter().chain(&t.actions).chain(&t.rewards).chain(&t.next_obs) {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut h = [0u8; HEADER_LEN];
        read_exact_or(r, &mut h, "header")?;
        let header = DatasetHeader::decode(&h)?;
        let n = header.num_agents as usize;
        let (od, ad) = (header.obs_dim as usize, header.act_dim as usize);
        let floats = header.record_floats();
        let expected_len = 4 + 4 * floats;
        let mut transitions = Vec::with_capacity(header.transition_count.min(1 << 20) as usize);
        let mut buf = vec![0u8; expected_len];
        for i in 0..header.transition_count {
            let mut len = [0u8; 4];
            read_exact_or(r, &mut len, &format!("length of record {i}"))?;
            let len = u32::from_le_bytes(len) as usize;
            if len != expected_len {
                return Err(DatasetError::Corrupt(format!("record {i} has length {len}, expected {expected_len}")));
            }
            read_exact_or(r, &mut buf, &format!("record {i}"))?;
            let flags = u32::from_le_bytes(buf[0..4].try_into().expect("4 bytes"));
            let vals: Vec<f32> = buf[4..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let (obs, rest) = vals.split_at(n * od);
            let (actions, rest) = rest.split_at(n * ad);
            let (rewards, next_obs) = rest.split_at(n);
            transitions.push(Transition {
                obs: obs.to_vec(),
                actions: actions.to_vec(),
                rewards: rewards.to_vec(),
                next_obs: next_obs.to_vec(),
                done: flags & 1 != 0,
                episode_end: flags & 2 != 0,
            });
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(DatasetError::Corrupt("trailing bytes after last record".into()));
        }
        Ok(Self { header, transitions })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    /// Episode boundaries as `(start, end)` index ranges.
    pub fn episodes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, t) in self.transitions.iter().enumerate() {
            if t.episode_end {
                out.push((start, i + 1));
                start = i + 1;
            }
        }
        if start < self.transitions.len() {
            out.push((start, self.transitions.len()));
        }
        out
    }
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => DatasetError::Truncated(format!("end of file inside {what}")),
        _ => DatasetError::Io(e),
    })
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every observation entry (current
/// and next); actions, rewards and flags are untouched.
pub fn inject_gaussian_noise(dataset: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0) {
        return Err(DatasetError::NegativeSigma(sigma));
    }
    let mut out = dataset.clone();
    out.header.noise_sigma = sigma;
    out.header.noise_seed = seed;
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in &mut out.transitions {
        for x in t.obs.iter_mut().chain(t.next_obs.iter_mut()) {
            *x = (*x as f64 + normal.sample(&mut rng)) as f32;
        }
    }
    Ok(out)
}
