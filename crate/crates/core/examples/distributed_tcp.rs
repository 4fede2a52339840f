//! Store, trainer and two rollout workers talking over TCP on localhost.
//! Each role only sees a `RemoteFabric`, exactly as separate processes would.
//!
//! `cargo run --release --example distributed_tcp [updates]`

use std::sync::Arc;
use std::time::Duration;

use dracer::fabric::{
    trainer_loop, Budget, FabricServer, LocalFabric, RemoteFabric, RolloutWorker, RunSpec, Scheduling, StopSignal,
    StoreConfig, Trainer, TrainerSinks, WorkerLimits,
};
use dracer::rl::TrainerConfig;
use dracer::sim::{ActionSpace, SimConfig, Track};

fn main() -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let updates: u64 = std::env::args().nth(1).map_or(Ok(10), |s| s.parse())?;
    let track = Arc::new(Track::oval(8.0, 1.0, 0.6)?);
    let mut spec = RunSpec::new(track, SimConfig::features(), TrainerConfig::default(), 3, Budget::updates(updates));
    spec.workers = 2;
    spec.scheduling = Some(Scheduling::Async);

    let server = FabricServer::bind("127.0.0.1:0", LocalFabric::new(StoreConfig::default()))?;
    let addr = server.local_addr().to_string();
    println!("store listening on {addr}");
    let stop = StopSignal::default();
    let mut trainer = Trainer::new(
        spec.trainer.clone(),
        spec.architecture(),
        ActionSpace::from_config(&spec.sim).count(),
        spec.trainer_seed(),
        String::new(),
        spec.clock(),
    )?;

    let reports = std::thread::scope(|scope| -> Result<_, Box<dyn std::error::Error + Send + Sync>> {
        let workers: Vec<_> = (0..spec.workers)
            .map(|i| {
                let (addr, spec, stop) = (addr.clone(), &spec, &stop);
                scope.spawn(move || {
                    let remote = RemoteFabric::new(addr, Duration::from_secs(10));
                    let mut worker = RolloutWorker::new(spec.worker_config(i), spec.track.clone())?;
                    worker.run(&remote, stop, WorkerLimits::default())?;
                    Ok::<_, dracer::fabric::FabricError>(worker.episodes_run())
                })
            })
            .collect();
        let remote = RemoteFabric::new(addr.clone(), Duration::from_secs(10));
        let sinks = TrainerSinks { metrics: None, checkpoint_dir: None };
        let reports = trainer_loop(&mut trainer, &remote, &spec.budget, &stop, sinks)?;
        stop.stop();
        server.fabric().close();
        for (i, w) in workers.into_iter().enumerate() {
            let episodes = w.join().map_err(|_| "worker panicked")??;
            println!("worker {i} ran {episodes} episodes");
        }
        Ok(reports)
    })?;

    for r in &reports {
        println!(
            "v{:<3} steps {:>6}  progress {:.3}  max version lag {}",
            r.row.version, r.row.steps, r.row.mean_progress, r.max_version_lag
        );
    }
    Ok(())
}
