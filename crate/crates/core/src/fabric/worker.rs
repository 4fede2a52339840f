use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::record::{episode_id, Counters, ExperienceRecord, WorkerId};
use super::store::Fetched;
use super::{Fabric, FabricError, StopSignal};
use crate::randomize::{augment_image, perturb_action, randomize_episode, RandomizationConfig};
use crate::rl::{log_softmax, sample_categorical, Checkpoint, Mode, PolicyValueNets};
use crate::sim::{Observation, RacingEnv, SimConfig, Track};

/// When a worker may move to a newer checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduling {
    /// Pick up the latest checkpoint every `refetch_every` episodes without
    /// waiting.
    Async,
    /// Run exactly this many episodes per checkpoint version, then wait for
    /// the next one. With one worker this makes a run deterministic.
    Sync { episodes_per_version: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerConfig {
    pub worker_id: WorkerId,
    pub randomization: RandomizationConfig,
    /// Episodes between checkpoint fetches under async scheduling.
    pub refetch_every: usize,
    pub sim: SimConfig,
    pub scheduling: Scheduling,
    /// Records per append request.
    pub chunk_records: usize,
    /// Under async scheduling, wait for a newer checkpoint whenever the
    /// store already holds this many undrained episodes.
    pub pace_pending: Option<u64>,
    pub seed: u64,
}

impl WorkerConfig {
    pub fn new(worker_id: WorkerId, sim: SimConfig, randomization: RandomizationConfig, seed: u64) -> Self {
        WorkerConfig {
            worker_id,
            randomization,
            refetch_every: 1,
            sim,
            scheduling: Scheduling::Async,
            chunk_records: 512,
            pace_pending: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerLimits {
    pub max_episodes: Option<u64>,
    /// Longest wait for a (newer) checkpoint before giving up.
    pub checkpoint_timeout: Duration,
}

impl Default for WorkerLimits {
    fn default() -> Self {
        WorkerLimits { max_episodes: None, checkpoint_timeout: Duration::from_secs(600) }
    }
}

/// Runs episodes with the latest policy and ships them to the store.
pub struct RolloutWorker {
    cfg: WorkerConfig,
    env: RacingEnv,
    rng: ChaCha8Rng,
    policy: Option<(u64, PolicyValueNets<f32>)>,
    episodes_run: u64,
    steps_run: u64,
    episodes_on_version: usize,
}

impl RolloutWorker {
    pub fn new(cfg: WorkerConfig, track: Arc<Track>) -> Result<Self, FabricError> {
        let env = RacingEnv::new(track, cfg.sim.clone())?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(RolloutWorker { cfg, env, rng, policy: None, episodes_run: 0, steps_run: 0, episodes_on_version: 0 })
    }

    pub fn config(&self) -> &WorkerConfig {
        &self.cfg
    }

    pub fn episodes_run(&self) -> u64 {
        self.episodes_run
    }

    pub fn steps_run(&self) -> u64 {
        self.steps_run
    }

    pub fn policy_version(&self) -> Option<u64> {
        self.policy.as_ref().map(|(v, _)| *v)
    }

    pub fn set_policy(&mut self, version: u64, nets: PolicyValueNets<f32>) {
        self.policy = Some((version, nets));
        self.episodes_on_version = 0;
    }

    fn adopt(&mut self, fetched: Fetched) -> Result<bool, FabricError> {
        match fetched {
            Fetched::Checkpoint { version, bytes } => {
                let ck = Checkpoint::from_bytes(&bytes)?;
                self.set_policy(version, ck.nets);
                Ok(true)
            }
            Fetched::Empty | Fetched::Unchanged => Ok(false),
        }
    }

    /// Waits for a checkpoint newer than the current one.
    fn await_newer(&mut self, fabric: &dyn Fabric, stop: &StopSignal, timeout: Duration) -> Result<bool, FabricError> {
        let deadline = Instant::now() + timeout;
        while !stop.is_stopped() {
            let fetched = fabric.fetch(self.policy_version(), Some(Duration::from_millis(200)))?;
            if self.adopt(fetched)? {
                return Ok(true);
            }
            if Instant::now() > deadline {
                return Err(FabricError::Timeout("a newer checkpoint"));
            }
        }
        Ok(false)
    }

    fn observe(&mut self, obs: Observation) -> Arc<Observation> {
        let aug = &self.cfg.randomization;
        Arc::new(match obs {
            Observation::Image(img) if !aug.image_augs.is_empty() => {
                Observation::Image(augment_image(&img, aug, &mut self.rng))
            }
            other => other,
        })
    }

    /// One episode with the current policy. The sampled action and its
    /// log-probability are logged; the simulator executes the perturbed
    /// controls.
    pub fn run_episode(&mut self) -> Result<Vec<ExperienceRecord>, FabricError> {
        let (version, nets) = self.policy.as_ref().ok_or(FabricError::Timeout("an initial checkpoint"))?;
        let (version, nets) = (*version, nets.clone());
        let local = self.episodes_run;
        let id = episode_id(self.cfg.worker_id, local);
        let episode =
            randomize_episode(local, self.env.track(), &self.cfg.randomization, self.cfg.sim.max_steps, &mut self.rng);
        let first = self.env.reset(&episode)?;
        let mut obs = self.observe(first);
        let space = self.env.action_space().clone();
        let mut records = Vec::new();
        loop {
            let input = nets.input(&obs)?;
            let out = nets.forward_policy(&input, Mode::Eval)?;
            let action = sample_categorical(&out.probs, &mut self.rng);
            let log_prob = log_softmax(&out.logits)[action];
            let value = nets.forward_value(&input)?;
            let (steer, speed) = space.map_action(action)?;
            let (steer, speed) = perturb_action(
                steer,
                speed,
                self.cfg.randomization.action_noise_frac,
                &space,
                self.cfg.sim.vmax,
                &mut self.rng,
            );
            let step = self.env.step_controls(steer, speed)?;
            let next = self.observe(step.observation);
            records.push(ExperienceRecord {
                episode_id: id,
                step_index: records.len() as u32,
                observation: obs,
                action: action as u32,
                reward: step.reward as f32,
                next_observation: next.clone(),
                done: step.done,
                log_prob,
                value,
                policy_version: version,
                worker_id: self.cfg.worker_id,
                progress: step.info.progress as f32,
            });
            obs = next;
            if step.done {
                break;
            }
        }
        self.episodes_run += 1;
        self.episodes_on_version += 1;
        self.steps_run += records.len() as u64;
        Ok(records)
    }

    /// Appends an episode in chunks; returns the store counters after the
    /// last chunk.
    pub fn ship(&self, fabric: &dyn Fabric, records: Vec<ExperienceRecord>) -> Result<Counters, FabricError> {
        let mut rest = records;
        let mut counters = Counters::default();
        while !rest.is_empty() {
            let tail = rest.split_off(rest.len().min(self.cfg.chunk_records.max(1)));
            counters = fabric.append(rest)?;
            rest = tail;
        }
        Ok(counters)
    }

    /// Fetch, run, append, until stopped or out of episodes.
    pub fn run(&mut self, fabric: &dyn Fabric, stop: &StopSignal, limits: WorkerLimits) -> Result<(), FabricError> {
        let mut since_fetch = 0;
        let mut backlogged = false;
        while !stop.is_stopped() && limits.max_episodes.is_none_or(|m| self.episodes_run < m) {
            match self.cfg.scheduling {
                Scheduling::Sync { episodes_per_version } => {
                    if (self.policy.is_none() || self.episodes_on_version >= episodes_per_version)
                        && !self.await_newer(fabric, stop, limits.checkpoint_timeout)?
                    {
                        break;
                    }
                }
                Scheduling::Async => {
                    if self.policy.is_none() || backlogged {
                        if !self.await_newer(fabric, stop, limits.checkpoint_timeout)? {
                            break;
                        }
                        since_fetch = 0;
                    } else if since_fetch >= self.cfg.refetch_every {
                        let fetched = fabric.fetch(self.policy_version(), None)?;
                        self.adopt(fetched)?;
                        since_fetch = 0;
                    }
                }
            }
            let records = self.run_episode()?;
            let counters = match self.ship(fabric, records) {
                Err(FabricError::Closed) => break,
                other => other?,
            };
            backlogged = self.cfg.pace_pending.is_some_and(|cap| counters.pending_episodes >= cap);
            since_fetch += 1;
        }
        Ok(())
    }
}
