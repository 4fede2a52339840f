//! Checkpoint evaluation: the fixed-start naive protocol, the perturbed
//! robust protocol, and windowed checkpoint selection.

mod controller;
mod log;
mod select;

pub use controller::centerline_controller;
pub use log::{parse_eval_log, EvalLogWriter, EVAL_LOG_HEADER};
pub use select::select_checkpoint;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, KvFile};
use crate::geometry::Direction;
use crate::randomize::{augment_image, perturb_action, ImageAug, RandomizationConfig};
use crate::rl::{argmax, Checkpoint, Mode, PolicyValueNets, RlError};
use crate::sim::{EpisodeConfig, Observation, RacingEnv, SimConfig, SimError, Track};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] RlError),
    #[error("simulator: {0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Usage(String),
    #[error("evaluation log line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Naive,
    Robust,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Naive => "naive",
            Protocol::Robust => "robust",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "naive" => Ok(Protocol::Naive),
            "robust" => Ok(Protocol::Robust),
            _ => Err(format!("unknown protocol `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub trials: usize,
    /// Robust-protocol action noise as a fraction of full scale.
    pub noise_frac: f64,
    /// Apply every image augmentation (at the default probability) to
    /// evaluation observations.
    pub augment: bool,
    pub seed: u64,
    /// Window of [`select_checkpoint`].
    pub select_window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { trials: 10, noise_frac: 0.1, augment: false, seed: 0, select_window: 3 }
    }
}

pub const SECTION: &str = "eval";
const KEYS: &[&str] = &["trials", "noise_frac", "augment", "seed", "select_window"];

impl EvalConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(format!("[{SECTION}] {msg}")));
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        if !(0.0..=1.0).contains(&self.noise_frac) {
            return bad("noise_frac must lie in [0, 1]");
        }
        if self.select_window == 0 {
            return bad("select_window must be positive");
        }
        Ok(())
    }

    pub fn from_kv(file: &KvFile) -> Result<Self, ConfigError> {
        let s = file.section(SECTION);
        s.check_keys(KEYS)?;
        let mut c = EvalConfig::default();
        s.read("trials", &mut c.trials)?;
        s.read("noise_frac", &mut c.noise_frac)?;
        s.read("augment", &mut c.augment)?;
        s.read("seed", &mut c.seed)?;
        s.read("select_window", &mut c.select_window)?;
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, file: &mut KvFile) {
        file.set(SECTION, "trials", self.trials);
        file.set(SECTION, "noise_frac", self.noise_frac);
        file.set(SECTION, "augment", self.augment);
        file.set(SECTION, "seed", self.seed);
        file.set(SECTION, "select_window", self.select_window);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub trial: usize,
    pub start_waypoint: usize,
    pub direction: Direction,
    pub progress: f64,
    pub lap_complete: bool,
    pub steps: usize,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u64,
    pub protocol: Protocol,
    pub runs: Vec<EvalRun>,
    pub mean_progress: f64,
    pub completion_rate: f64,
    pub config_hash: String,
}

impl EvalReport {
    /// Aggregates are always recomputed from the runs.
    pub fn from_runs(version: u64, protocol: Protocol, runs: Vec<EvalRun>, config_hash: String) -> Self {
        let n = runs.len().max(1) as f64;
        let mean_progress = runs.iter().map(|r| r.progress).sum::<f64>() / n;
        let completion_rate = runs.iter().filter(|r| r.lap_complete).count() as f64 / n;
        EvalReport { version, protocol, runs, mean_progress, completion_rate, config_hash }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Anything that picks one action deterministically from an observation.
pub trait GreedyPolicy {
    fn greedy_action(&self, obs: &Observation) -> Result<usize, EvalError>;
}

impl GreedyPolicy for PolicyValueNets<f32> {
    fn greedy_action(&self, obs: &Observation) -> Result<usize, EvalError> {
        let input = self.input(obs)?;
        Ok(argmax(&self.forward_policy(&input, Mode::Eval)?.probs))
    }
}

impl<F: Fn(&Observation) -> usize> GreedyPolicy for F {
    fn greedy_action(&self, obs: &Observation) -> Result<usize, EvalError> {
        Ok(self(obs))
    }
}

/// Start waypoint and direction of one trial.
pub fn trial_setup(protocol: Protocol, trial: usize, trials: usize, waypoints: usize) -> (usize, Direction) {
    match protocol {
        Protocol::Naive => (0, Direction::Forward),
        Protocol::Robust => {
            let start = ((trial * waypoints) as f64 / trials as f64).round() as usize % waypoints;
            let dir = if trial.is_multiple_of(2) { Direction::Forward } else { Direction::Reverse };
            (start, dir)
        }
    }
}

fn config_hash(protocol: Protocol, cfg: &EvalConfig, sim: &SimConfig, track: &Track) -> String {
    let text = format!(
        "{}|{}|{:?}|{}|{}|{:?}|{}",
        protocol.as_str(),
        cfg.trials,
        cfg.noise_frac,
        cfg.augment,
        cfg.seed,
        sim,
        track.name()
    );
    format!("{:08x}", crc32fast::hash(text.as_bytes()))
}

/// Runs `cfg.trials` episodes of `protocol` with greedy action selection.
pub fn evaluate(
    policy: &dyn GreedyPolicy,
    track: &Arc<Track>,
    sim: &SimConfig,
    protocol: Protocol,
    cfg: &EvalConfig,
    version: u64,
) -> Result<EvalReport, EvalError> {
    if cfg.trials == 0 {
        return Err(EvalError::Usage("trials must be positive".into()));
    }
    let mut env = RacingEnv::new(track.clone(), SimConfig { realtime_factor: 0.0, ..sim.clone() })?;
    let space = env.action_space().clone();
    let augment = cfg
        .augment
        .then(|| RandomizationConfig { image_augs: ImageAug::ALL.to_vec(), ..RandomizationConfig::none() });
    let waypoints = track.centerline.len();
    let mut runs = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let (start, direction) = trial_setup(protocol, trial, cfg.trials, waypoints);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let episode = EpisodeConfig { start_waypoint_index: start, direction, max_steps: sim.max_steps, seed: cfg.seed };
        let mut obs = env.reset(&episode)?;
        let (mut total, mut steps) = (0.0, 0);
        let info = loop {
            if let (Some(aug), Observation::Image(img)) = (&augment, &obs) {
                obs = Observation::Image(augment_image(img, aug, &mut rng));
            }
            let action = policy.greedy_action(&obs)?;
            let (steer, speed) = space.map_action(action)?;
            let (steer, speed) = match protocol {
                Protocol::Naive => (steer, speed),
                Protocol::Robust => perturb_action(steer, speed, cfg.noise_frac, &space, sim.vmax, &mut rng),
            };
            let r = env.step_controls(steer, speed)?;
            total += r.reward;
            steps += 1;
            if r.done {
                break r.info;
            }
            obs = r.observation;
        };
        runs.push(EvalRun {
            trial,
            start_waypoint: start,
            direction,
            progress: info.progress,
            lap_complete: info.lap_complete,
            steps,
            mean_reward: total / steps as f64,
        });
    }
    Ok(EvalReport::from_runs(version, protocol, runs, config_hash(protocol, cfg, sim, track)))
}

pub fn naive_evaluate(
    checkpoint: &Checkpoint,
    track: &Arc<Track>,
    sim: &SimConfig,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    evaluate(&checkpoint.nets, track, sim, Protocol::Naive, cfg, checkpoint.meta.version)
}

pub fn robust_evaluate(
    checkpoint: &Checkpoint,
    track: &Arc<Track>,
    sim: &SimConfig,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    evaluate(&checkpoint.nets, track, sim, Protocol::Robust, cfg, checkpoint.meta.version)
}
