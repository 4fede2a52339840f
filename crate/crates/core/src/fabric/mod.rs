//! The decoupled training fabric: an experience store and a checkpoint
//! store, reachable in-process or over the framed TCP protocol, and the
//! rollout worker, trainer and evaluator loops that run against them.

mod client;
mod evaluator;
mod metrics;
pub mod protocol;
mod record;
mod runner;
mod server;
mod store;
mod trainer;
mod worker;

pub use client::{Backoff, RemoteFabric};
pub use evaluator::{evaluate_checkpoint, evaluator_loop, summary_file_name, EvaluatorConfig};
pub use metrics::{MetricsRow, MetricsWriter, METRICS_HEADER};
pub use record::{episode_id, Counters, Episode, EpisodeId, ExperienceRecord, WorkerId};
pub use runner::{run_all_in_one, run_sequential, Budget, Clock, RunOutput, RunPaths, RunSpec};
pub use server::FabricServer;
pub use store::{CheckpointStore, ExperienceStore, Fetched, StoreConfig};
pub use trainer::{checkpoint_file_name, trainer_loop, Trainer, TrainerSinks, UpdateReport};
pub use worker::{RolloutWorker, Scheduling, WorkerConfig, WorkerLimits};

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::config::{ConfigError, KvFile};
use crate::eval::EvalError;
use crate::rl::RlError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum FabricError {
    #[error("rejected: {0}")]
    Rejected(String),
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("frame of {0} bytes exceeds the 64 MiB limit")]
    FrameTooLarge(usize),
    #[error("endpoint {addr} unreachable after {attempts} attempts")]
    Unreachable { addr: String, attempts: u32 },
    #[error("store closed")]
    Closed,
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const SECTION: &str = "fabric";
pub const DEFAULT_ADDR: &str = "127.0.0.1:7447";
const KEYS: &[&str] = &["addr", "max_pending", "partial_timeout_s"];

/// Endpoint and store limits of a distributed run.
#[derive(Debug, Clone, PartialEq)]
pub struct FabricConfig {
    /// Store address: where the store listens and other roles connect.
    pub addr: String,
    pub store: StoreConfig,
}

impl Default for FabricConfig {
    fn default() -> Self {
        FabricConfig { addr: DEFAULT_ADDR.into(), store: StoreConfig::default() }
    }
}

impl FabricConfig {
    pub fn from_kv(file: &KvFile) -> Result<Self, ConfigError> {
        let s = file.section(SECTION);
        s.check_keys(KEYS)?;
        let mut c = FabricConfig::default();
        s.read("addr", &mut c.addr)?;
        s.read("max_pending", &mut c.store.max_pending)?;
        let mut timeout = c.store.partial_timeout.as_secs_f64();
        s.read("partial_timeout_s", &mut timeout)?;
        if !(timeout > 0.0) || !timeout.is_finite() {
            return Err(s.value_error("partial_timeout_s", "must be positive"));
        }
        c.store.partial_timeout = Duration::from_secs_f64(timeout);
        if c.store.max_pending == 0 {
            return Err(s.value_error("max_pending", "must be positive"));
        }
        Ok(c)
    }

    pub fn write_kv(&self, file: &mut KvFile) {
        file.set(SECTION, "addr", &self.addr);
        file.set(SECTION, "max_pending", self.store.max_pending);
        file.set(SECTION, "partial_timeout_s", self.store.partial_timeout.as_secs_f64());
    }
}

/// Store and checkpoint endpoints as seen by workers, trainers and
/// evaluators.
pub trait Fabric: Send + Sync {
    /// Appends records of one episode; see [`ExperienceStore::append`].
    fn append(&self, records: Vec<ExperienceRecord>) -> Result<Counters, FabricError>;
    /// Exactly `episodes` complete episodes, or `None` when not ready by the
    /// end of `wait`.
    fn drain(&self, episodes: usize, wait: Option<Duration>) -> Result<Option<Vec<Episode>>, FabricError>;
    /// Publishes a serialized checkpoint and returns its assigned version.
    fn publish(&self, checkpoint: &[u8]) -> Result<u64, FabricError>;
    fn fetch(&self, newer_than: Option<u64>, wait: Option<Duration>) -> Result<Fetched, FabricError>;
    fn counters(&self) -> Result<Counters, FabricError>;
}

/// Both stores in this process.
#[derive(Clone, Default)]
pub struct LocalFabric {
    pub experience: Arc<ExperienceStore>,
    pub checkpoints: Arc<CheckpointStore>,
}

impl LocalFabric {
    pub fn new(cfg: StoreConfig) -> Self {
        LocalFabric { experience: Arc::new(ExperienceStore::new(cfg)), checkpoints: Arc::default() }
    }

    pub fn close(&self) {
        self.experience.close();
        self.checkpoints.close();
    }
}

impl Fabric for LocalFabric {
    fn append(&self, records: Vec<ExperienceRecord>) -> Result<Counters, FabricError> {
        let mut c = self.experience.append(records)?;
        c.latest_version = self.checkpoints.latest_version();
        Ok(c)
    }

    fn drain(&self, episodes: usize, wait: Option<Duration>) -> Result<Option<Vec<Episode>>, FabricError> {
        Ok(self.experience.drain(episodes, wait))
    }

    fn publish(&self, checkpoint: &[u8]) -> Result<u64, FabricError> {
        let v = self.checkpoints.publish(checkpoint)?;
        self.experience.note_version(v);
        Ok(v)
    }

    fn fetch(&self, newer_than: Option<u64>, wait: Option<Duration>) -> Result<Fetched, FabricError> {
        Ok(self.checkpoints.fetch(newer_than, wait))
    }

    fn counters(&self) -> Result<Counters, FabricError> {
        let mut c = self.experience.counters();
        c.latest_version = self.checkpoints.latest_version();
        Ok(c)
    }
}

/// Cooperative shutdown broadcast shared by every role of a run.
#[derive(Debug, Clone, Default)]
pub struct StopSignal(Arc<AtomicBool>);

impl StopSignal {
    pub fn stop(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_stopped(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fabric_section_round_trips() {
        let c = FabricConfig {
            addr: "0.0.0.0:9000".into(),
            store: StoreConfig { max_pending: 50, partial_timeout: Duration::from_millis(2500) },
        };
        let mut f = KvFile::default();
        c.write_kv(&mut f);
        assert_eq!(FabricConfig::from_kv(&KvFile::parse(&f.to_text()).unwrap()).unwrap(), c);
        assert_eq!(FabricConfig::from_kv(&KvFile::default()).unwrap(), FabricConfig::default());
        assert!(FabricConfig::from_kv(&KvFile::parse("[fabric]\nmax_pending=0\n").unwrap()).is_err());
    }
}
