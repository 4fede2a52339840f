use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::sim::Observation;

pub type EpisodeId = u64;
pub type WorkerId = u32;

/// One environment transition as logged by a rollout worker. Consecutive
/// records of an episode share observation allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceRecord {
    pub episode_id: EpisodeId,
    pub step_index: u32,
    pub observation: Arc<Observation>,
    pub action: u32,
    pub reward: f32,
    pub next_observation: Arc<Observation>,
    pub done: bool,
    /// Log-probability of `action` under the behaviour policy.
    pub log_prob: f32,
    /// Behaviour value estimate of `observation`.
    pub value: f32,
    pub policy_version: u64,
    pub worker_id: WorkerId,
    /// Lap progress fraction after this step.
    pub progress: f32,
}

/// Globally unique episode id from a worker id and its local counter.
pub fn episode_id(worker: WorkerId, local_index: u64) -> EpisodeId {
    ((worker as u64) << 40) | (local_index & ((1 << 40) - 1))
}

/// A complete episode, records in step order.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub records: Vec<ExperienceRecord>,
}

impl Episode {
    pub fn id(&self) -> EpisodeId {
        self.records[0].episode_id
    }

    pub fn worker_id(&self) -> WorkerId {
        self.records[0].worker_id
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward as f64).sum()
    }

    pub fn final_progress(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.progress as f64)
    }

    pub fn oldest_version(&self) -> u64 {
        self.records.iter().map(|r| r.policy_version).min().unwrap_or(0)
    }
}

/// Store counters, as carried by every append acknowledgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub total_episodes: u64,
    pub total_steps: u64,
    pub pending_episodes: u64,
    pub drained_episodes: u64,
    pub partial_episodes: u64,
    pub latest_version: u64,
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::sim::{GrayImage, FEATURE_LEN};

    /// A synthetic complete episode whose records share observation buffers.
    pub fn episode(worker: WorkerId, local: u64, len: usize, image: bool) -> Episode {
        let obs: Vec<Arc<Observation>> = (0..=len)
            .map(|k| {
                Arc::new(if image {
                    Observation::Image(GrayImage::filled(6, 4, k as u8))
                } else {
                    Observation::Features([k as f32 * 0.5; FEATURE_LEN])
                })
            })
            .collect();
        Episode {
            records: (0..len)
                .map(|k| ExperienceRecord {
                    episode_id: episode_id(worker, local),
                    step_index: k as u32,
                    observation: obs[k].clone(),
                    action: (k % 10) as u32,
                    reward: 0.5,
                    next_observation: obs[k + 1].clone(),
                    done: k + 1 == len,
                    log_prob: -(k as f32) * 0.1,
                    value: 1.5,
                    policy_version: 3,
                    worker_id: worker,
                    progress: k as f32 / 100.0,
                })
                .collect(),
        }
    }
}
