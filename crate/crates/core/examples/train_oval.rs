//! Trains a feature policy on the oval with one worker and evaluates each
//! published version under both protocols.
//!
//! `cargo run --release --example train_oval [steps] [out_dir]`

use std::path::PathBuf;
use std::sync::Arc;

use dracer::eval::Protocol;
use dracer::fabric::{run_all_in_one, Budget, EvaluatorConfig, RunSpec};
use dracer::rl::TrainerConfig;
use dracer::sim::{SimConfig, Track};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(Ok(60_000), |s| s.parse())?;
    let out = args.next().map_or_else(|| std::env::temp_dir().join("dracer-train-oval"), PathBuf::from);
    if out.exists() {
        std::fs::remove_dir_all(&out)?;
    }

    let track = Arc::new(Track::oval(8.0, 1.0, 0.6)?);
    let sim = SimConfig::features();
    let mut spec = RunSpec::new(track, sim.clone(), TrainerConfig::default(), 0, Budget::steps(steps));
    spec.evaluation = Some(EvaluatorConfig::both(sim));
    spec.out_dir = Some(out.clone());
    let run = run_all_in_one(&spec)?;

    for row in &run.metrics {
        println!("v{:<3} steps {:>6}  train progress {:.3}", row.version, row.steps, row.mean_progress);
    }
    for report in run.eval_reports.iter().filter(|r| r.protocol == Protocol::Naive).rev().take(1) {
        println!("latest evaluated v{}: naive progress {:.3}", report.version, report.mean_progress);
    }
    println!("metrics, checkpoints and evaluation log in {}", out.display());
    Ok(())
}
