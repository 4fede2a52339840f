use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{MetricsRow, MetricsWriter};
use super::record::Episode;
use super::runner::{Budget, Clock};
use super::{Fabric, FabricError, StopSignal};
use crate::rl::{
    compute_gae, ppo_update, Adam, Architecture, Checkpoint, CheckpointMeta, PolicyValueNets, RlError, Sample,
    TrainerConfig, UpdateStats,
};

/// Outcome of one training step on a drained batch.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport {
    pub row: MetricsRow,
    /// `None` when the update was discarded for a non-finite loss.
    pub stats: Option<UpdateStats>,
    /// Largest gap between the trainer's version and a trained record's
    /// behaviour version.
    pub max_version_lag: u64,
}

/// The sole writer of network parameters.
pub struct Trainer {
    cfg: TrainerConfig,
    nets: PolicyValueNets<f32>,
    optimizer: Adam<f32>,
    rng: ChaCha8Rng,
    version: u64,
    updates: u64,
    episodes: u64,
    steps: u64,
    config_text: String,
    clock: Clock,
}

impl Trainer {
    pub fn new(
        cfg: TrainerConfig,
        architecture: Architecture,
        action_count: usize,
        seed: u64,
        config_text: String,
        clock: Clock,
    ) -> Result<Self, FabricError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nets = PolicyValueNets::new(architecture, action_count, cfg.dropout_p, &mut rng)?;
        let optimizer = Adam::new(&nets, cfg.learning_rate);
        Ok(Trainer { cfg, nets, optimizer, rng, version: 0, updates: 0, episodes: 0, steps: 0, config_text, clock })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn nets(&self) -> &PolicyValueNets<f32> {
        &self.nets
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn elapsed_s(&self) -> f64 {
        self.clock.elapsed_s(self.steps)
    }

    /// Snapshot stamped with the version it will receive when published.
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            meta: CheckpointMeta {
                version: self.version + 1,
                episodes: self.episodes,
                steps: self.steps,
                created_unix_ms: self.clock.timestamp_ms(self.steps),
                config: self.config_text.clone(),
            },
            nets: self.nets.clone(),
        }
    }

    /// Publishes the current parameters and adopts the assigned version.
    pub fn publish(&mut self, fabric: &dyn Fabric) -> Result<Checkpoint, FabricError> {
        let mut ck = self.checkpoint();
        let v = fabric.publish(&ck.to_bytes())?;
        ck.meta.version = v;
        self.version = v;
        Ok(ck)
    }

    /// GAE per episode, then one PPO update over all their transitions.
    /// Truncated episodes are treated as terminal.
    pub fn train(&mut self, episodes: &[Episode]) -> Result<UpdateReport, FabricError> {
        let gamma = self.cfg.gamma;
        let lam = self.cfg.lam;
        let mut samples = Vec::new();
        let mut max_lag = 0;
        for ep in episodes {
            let rewards: Vec<f64> = ep.records.iter().map(|r| r.reward as f64).collect();
            let mut values: Vec<f64> = ep.records.iter().map(|r| r.value as f64).collect();
            values.push(0.0);
            let dones: Vec<bool> = ep.records.iter().map(|r| r.done).collect();
            let (adv, ret) = compute_gae(&rewards, &values, &dones, gamma, lam)?;
            for ((r, a), g) in ep.records.iter().zip(adv).zip(ret) {
                max_lag = max_lag.max(self.version.saturating_sub(r.policy_version));
                samples.push(Sample {
                    input: self.nets.input(&r.observation)?,
                    action: r.action as usize,
                    old_log_prob: r.log_prob,
                    advantage: a as f32,
                    ret: g as f32,
                });
            }
        }
        let stats = match ppo_update(&mut self.nets, &mut self.optimizer, &samples, &self.cfg, &mut self.rng) {
            Ok(s) => Some(s),
            Err(RlError::NonFiniteLoss) => {
                log::warn!("update {}: non-finite loss, parameters kept", self.updates + 1);
                None
            }
            Err(e) => return Err(e.into()),
        };
        self.updates += 1;
        self.episodes += episodes.len() as u64;
        self.steps += samples.len() as u64;
        let n = episodes.len().max(1) as f64;
        let s = stats.unwrap_or_default();
        let row = MetricsRow {
            update: self.updates,
            version: self.version,
            episodes: self.episodes,
            steps: self.steps,
            mean_reward: episodes.iter().map(Episode::total_reward).sum::<f64>() / n,
            mean_progress: episodes.iter().map(Episode::final_progress).sum::<f64>() / n,
            policy_loss: s.policy_loss,
            value_loss: s.value_loss,
            entropy: s.entropy,
            clip_frac: s.clip_frac,
            wall_s: self.elapsed_s(),
        };
        Ok(UpdateReport { row, stats, max_version_lag: max_lag })
    }
}

/// Where a trainer loop writes its artifacts.
pub struct TrainerSinks<'a> {
    pub metrics: Option<&'a mut MetricsWriter>,
    pub checkpoint_dir: Option<&'a Path>,
}

pub fn checkpoint_file_name(version: u64) -> String {
    format!("v{version:06}.drck")
}

/// Publishes version 1, then drains, trains and publishes until the budget
/// is spent or `stop` is raised. Returns one report per update.
pub fn trainer_loop(
    trainer: &mut Trainer,
    fabric: &dyn Fabric,
    budget: &Budget,
    stop: &StopSignal,
    sinks: TrainerSinks<'_>,
) -> Result<Vec<UpdateReport>, FabricError> {
    let TrainerSinks { mut metrics, checkpoint_dir } = sinks;
    let started = Instant::now();
    let save = |ck: &Checkpoint| -> Result<(), FabricError> {
        if let Some(dir) = checkpoint_dir {
            ck.save(dir.join(checkpoint_file_name(ck.meta.version)))?;
        }
        Ok(())
    };
    save(&trainer.publish(fabric)?)?;
    let mut reports = Vec::new();
    while !stop.is_stopped() && !budget.exhausted(trainer.updates(), trainer.steps(), started.elapsed()) {
        let Some(episodes) = fabric.drain(trainer.config().episodes_per_update, Some(Duration::from_millis(200)))?
        else {
            if let Some(limit) = budget.seconds {
                if started.elapsed().as_secs_f64() >= limit {
                    break;
                }
            }
            continue;
        };
        let mut report = trainer.train(&episodes)?;
        let ck = trainer.publish(fabric)?;
        report.row.version = ck.meta.version;
        save(&ck)?;
        if let Some(m) = metrics.as_deref_mut() {
            m.append(&report.row)?;
        }
        log::info!(
            "update {} v{} steps {} progress {:.3} reward {:.1} entropy {:.3}",
            report.row.update,
            report.row.version,
            report.row.steps,
            report.row.mean_progress,
            report.row.mean_reward,
            report.row.entropy
        );
        reports.push(report);
    }
    Ok(reports)
}
