//! Trains without randomization, then compares naive and robust evaluation
//! per checkpoint and picks the checkpoint a robust selection would ship.
//!
//! `cargo run --release --example robust_eval [steps]`

use std::sync::Arc;

use dracer::eval::{select_checkpoint, EvalReport, Protocol};
use dracer::fabric::{run_sequential, Budget, EvaluatorConfig, RunSpec};
use dracer::rl::TrainerConfig;
use dracer::sim::{SimConfig, Track};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: u64 = std::env::args().nth(1).map_or(Ok(20_000), |s| s.parse())?;
    let track = Arc::new(Track::oval(8.0, 1.0, 0.6)?);
    let sim = SimConfig::features();
    let mut spec = RunSpec::new(track, sim.clone(), TrainerConfig::default(), 0, Budget::steps(steps));
    let evaluator = EvaluatorConfig::both(sim);
    let window = evaluator.eval.select_window;
    spec.evaluation = Some(evaluator);
    let run = run_sequential(&spec)?;

    let of = |p: Protocol| -> Vec<&EvalReport> { run.eval_reports.iter().filter(|r| r.protocol == p).collect() };
    println!("version  naive  robust  gap");
    for (n, r) in of(Protocol::Naive).into_iter().zip(of(Protocol::Robust)) {
        let gap = n.mean_progress - r.mean_progress;
        println!("v{:<6} {:.3}  {:.3}   {gap:+.3}", n.version, n.mean_progress, r.mean_progress);
    }
    let robust: Vec<EvalReport> = of(Protocol::Robust).into_iter().cloned().collect();
    let naive: Vec<EvalReport> = of(Protocol::Naive).into_iter().cloned().collect();
    println!(
        "selected by robust progress: v{}, by naive progress: v{} (window {window})",
        select_checkpoint(&robust, window)?,
        select_checkpoint(&naive, window)?
    );
    Ok(())
}
