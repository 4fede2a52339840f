use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::evaluator::{evaluate_checkpoint, evaluator_loop, EvaluatorConfig};
use super::metrics::{MetricsRow, MetricsWriter};
use super::trainer::{checkpoint_file_name, trainer_loop, Trainer, TrainerSinks};
use super::worker::{RolloutWorker, Scheduling, WorkerConfig, WorkerLimits};
use super::{Fabric, FabricError, LocalFabric, StopSignal, StoreConfig};
use crate::eval::{EvalLogWriter, EvalReport};
use crate::randomize::RandomizationConfig;
use crate::rl::{Architecture, Checkpoint, TrainerConfig};
use crate::sim::{ActionSpace, SimConfig, Track};

/// Source of the `wall_s` column and checkpoint timestamps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clock {
    Wall { start: Instant, unix_start_ms: u64 },
    /// Simulated seconds of trained experience, so reruns are byte-identical.
    Logical { dt: f64 },
}

impl Clock {
    pub fn wall() -> Self {
        let unix_start_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        Clock::Wall { start: Instant::now(), unix_start_ms }
    }

    pub fn elapsed_s(&self, steps: u64) -> f64 {
        match *self {
            Clock::Wall { start, .. } => start.elapsed().as_secs_f64(),
            Clock::Logical { dt } => steps as f64 * dt,
        }
    }

    pub fn timestamp_ms(&self, steps: u64) -> u64 {
        match *self {
            Clock::Wall { start, unix_start_ms } => unix_start_ms + start.elapsed().as_millis() as u64,
            Clock::Logical { dt } => (steps as f64 * dt * 1000.0).round() as u64,
        }
    }
}

/// Stop conditions; the first one reached ends training.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Budget {
    pub updates: Option<u64>,
    pub steps: Option<u64>,
    pub seconds: Option<f64>,
}

impl Budget {
    pub fn updates(n: u64) -> Self {
        Budget { updates: Some(n), ..Default::default() }
    }

    pub fn steps(n: u64) -> Self {
        Budget { steps: Some(n), ..Default::default() }
    }

    pub fn exhausted(&self, updates: u64, steps: u64, elapsed: Duration) -> bool {
        self.updates.is_some_and(|u| updates >= u)
            || self.steps.is_some_and(|s| steps >= s)
            || self.seconds.is_some_and(|s| elapsed.as_secs_f64() >= s)
    }

    pub fn is_unbounded(&self) -> bool {
        self.updates.is_none() && self.steps.is_none() && self.seconds.is_none()
    }
}

/// Everything needed to train on one track.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub track: Arc<Track>,
    pub sim: SimConfig,
    pub trainer: TrainerConfig,
    pub randomization: RandomizationConfig,
    pub workers: usize,
    pub seed: u64,
    pub budget: Budget,
    pub out_dir: Option<PathBuf>,
    pub evaluation: Option<EvaluatorConfig>,
    /// `None` picks synchronous scheduling for one worker, async otherwise.
    pub scheduling: Option<Scheduling>,
    /// `None` picks the logical clock under synchronous scheduling.
    pub clock: Option<Clock>,
    pub store: StoreConfig,
    /// Configuration text embedded in every checkpoint.
    pub config_text: String,
}

impl RunSpec {
    pub fn new(track: Arc<Track>, sim: SimConfig, trainer: TrainerConfig, seed: u64, budget: Budget) -> Self {
        RunSpec {
            track,
            sim,
            trainer,
            randomization: RandomizationConfig::none(),
            workers: 1,
            seed,
            budget,
            out_dir: None,
            evaluation: None,
            scheduling: None,
            clock: None,
            store: StoreConfig::default(),
            config_text: String::new(),
        }
    }

    pub fn scheduling(&self) -> Scheduling {
        self.scheduling.unwrap_or(if self.workers == 1 {
            Scheduling::Sync { episodes_per_version: self.trainer.episodes_per_update }
        } else {
            Scheduling::Async
        })
    }

    pub fn clock(&self) -> Clock {
        self.clock.unwrap_or(match self.scheduling() {
            Scheduling::Sync { .. } => Clock::Logical { dt: self.sim.dt },
            Scheduling::Async => Clock::wall(),
        })
    }

    pub fn architecture(&self) -> Architecture {
        Architecture::for_observations(self.sim.obs_mode, self.sim.image_w, self.sim.image_h)
    }

    pub fn trainer_seed(&self) -> u64 {
        splitmix64(self.seed)
    }

    pub fn worker_config(&self, index: usize) -> WorkerConfig {
        let seed = splitmix64(self.seed.wrapping_add(1 + index as u64)) ^ self.randomization.seed;
        let mut w = WorkerConfig::new(index as u32, self.sim.clone(), self.randomization.clone(), seed);
        w.scheduling = self.scheduling();
        w.pace_pending = Some(self.trainer.episodes_per_update as u64);
        w
    }

    fn trainer(&self) -> Result<Trainer, FabricError> {
        Trainer::new(
            self.trainer.clone(),
            self.architecture(),
            ActionSpace::from_config(&self.sim).count(),
            self.trainer_seed(),
            self.config_text.clone(),
            self.clock(),
        )
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Vec<MetricsRow>,
    pub max_version_lag: u64,
    pub final_checkpoint: Checkpoint,
    pub eval_reports: Vec<EvalReport>,
    pub worker_episodes: Vec<u64>,
}

/// Output files of a run directory.
pub struct RunPaths {
    pub metrics: PathBuf,
    pub checkpoints: PathBuf,
    pub eval_log: PathBuf,
    pub eval_dir: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> Self {
        RunPaths {
            metrics: root.join("metrics.csv"),
            checkpoints: root.join("checkpoints"),
            eval_log: root.join("eval_log.csv"),
            eval_dir: root.join("eval"),
        }
    }

    fn create(root: &Path) -> Result<Self, FabricError> {
        let p = Self::new(root);
        std::fs::create_dir_all(&p.checkpoints)?;
        std::fs::create_dir_all(&p.eval_dir)?;
        Ok(p)
    }
}

/// Store, trainer, workers and evaluator as threads of this process.
pub fn run_all_in_one(spec: &RunSpec) -> Result<RunOutput, FabricError> {
    if spec.workers == 0 {
        return Err(FabricError::Rejected("at least one worker is required".into()));
    }
    let paths = spec.out_dir.as_deref().map(RunPaths::create).transpose()?;
    let fabric = LocalFabric::new(spec.store);
    let stop = StopSignal::default();
    let mut trainer = spec.trainer()?;
    let mut metrics = paths.as_ref().map(|p| MetricsWriter::create(&p.metrics)).transpose()?;

    std::thread::scope(|scope| {
        let workers: Vec<_> = (0..spec.workers)
            .map(|i| {
                let (fabric, stop) = (&fabric, &stop);
                scope.spawn(move || -> Result<u64, FabricError> {
                    let mut w = RolloutWorker::new(spec.worker_config(i), spec.track.clone())?;
                    let r = w.run(fabric, stop, WorkerLimits::default());
                    if let Err(e) = &r {
                        log::error!("worker {i}: {e}");
                        stop.stop();
                    }
                    r.map(|()| w.episodes_run())
                })
            })
            .collect();
        let evaluator = spec.evaluation.as_ref().map(|cfg| {
            let (fabric, stop, paths) = (&fabric, &stop, paths.as_ref());
            scope.spawn(move || -> Result<Vec<EvalReport>, FabricError> {
                let mut log = paths.map(|p| EvalLogWriter::open(&p.eval_log)).transpose()?;
                evaluator_loop(fabric, &spec.track, cfg, stop, log.as_mut(), paths.map(|p| p.eval_dir.as_path()))
            })
        });

        let sinks =
            TrainerSinks { metrics: metrics.as_mut(), checkpoint_dir: paths.as_ref().map(|p| p.checkpoints.as_path()) };
        let trained = trainer_loop(&mut trainer, &fabric, &spec.budget, &stop, sinks);
        stop.stop();
        fabric.close();
        let worker_episodes = workers
            .into_iter()
            .map(|h| h.join().map_err(|_| FabricError::Protocol("worker panicked".into()))?)
            .collect::<Result<Vec<u64>, FabricError>>()?;
        let eval_reports = match evaluator {
            Some(h) => h.join().map_err(|_| FabricError::Protocol("evaluator panicked".into()))??,
            None => Vec::new(),
        };
        let reports = trained?;
        Ok(RunOutput {
            max_version_lag: reports.iter().map(|r| r.max_version_lag).max().unwrap_or(0),
            metrics: reports.into_iter().map(|r| r.row).collect(),
            final_checkpoint: final_checkpoint(&trainer),
            eval_reports,
            worker_episodes,
        })
    })
}

fn final_checkpoint(trainer: &Trainer) -> Checkpoint {
    let mut ck = trainer.checkpoint();
    ck.meta.version = trainer.version();
    ck
}

/// One worker and the trainer interleaved on the calling thread. Follows
/// the same schedule, seeds and store as a synchronous all-in-one run with
/// one worker, and evaluates every published version inline.
pub fn run_sequential(spec: &RunSpec) -> Result<RunOutput, FabricError> {
    let paths = spec.out_dir.as_deref().map(RunPaths::create).transpose()?;
    let fabric = LocalFabric::new(spec.store);
    let mut trainer = spec.trainer()?;
    let mut metrics = paths.as_ref().map(|p| MetricsWriter::create(&p.metrics)).transpose()?;
    let mut eval_log = match (&paths, &spec.evaluation) {
        (Some(p), Some(_)) => Some(EvalLogWriter::open(&p.eval_log)?),
        _ => None,
    };
    let mut worker = RolloutWorker::new(spec.worker_config(0), spec.track.clone())?;
    let per_update = spec.trainer.episodes_per_update;
    let started = Instant::now();
    let mut rows = Vec::new();
    let mut eval_reports = Vec::new();
    let mut max_lag = 0;

    let mut publish = |trainer: &mut Trainer, eval_reports: &mut Vec<EvalReport>| -> Result<Checkpoint, FabricError> {
        let ck = trainer.publish(&fabric)?;
        if let Some(p) = &paths {
            ck.save(p.checkpoints.join(checkpoint_file_name(ck.meta.version)))?;
        }
        if let Some(cfg) = &spec.evaluation {
            let dir = paths.as_ref().map(|p| p.eval_dir.as_path());
            eval_reports.extend(evaluate_checkpoint(&ck, &spec.track, cfg, eval_log.as_mut(), dir)?);
        }
        Ok(ck)
    };
    let ck = publish(&mut trainer, &mut eval_reports)?;
    worker.set_policy(ck.meta.version, ck.nets);
    while !spec.budget.exhausted(trainer.updates(), trainer.steps(), started.elapsed()) {
        for _ in 0..per_update {
            let records = worker.run_episode()?;
            worker.ship(&fabric, records)?;
        }
        let episodes = fabric.drain(per_update, None)?.expect("a full batch was just appended");
        let mut report = trainer.train(&episodes)?;
        let ck = publish(&mut trainer, &mut eval_reports)?;
        report.row.version = ck.meta.version;
        if let Some(m) = metrics.as_mut() {
            m.append(&report.row)?;
        }
        log::info!(
            "update {} v{} steps {} progress {:.3}",
            report.row.update,
            report.row.version,
            report.row.steps,
            report.row.mean_progress
        );
        max_lag = max_lag.max(report.max_version_lag);
        rows.push(report.row);
        worker.set_policy(ck.meta.version, ck.nets);
    }
    Ok(RunOutput {
        metrics: rows,
        max_version_lag: max_lag,
        final_checkpoint: final_checkpoint(&trainer),
        eval_reports,
        worker_episodes: vec![worker.episodes_run()],
    })
}
