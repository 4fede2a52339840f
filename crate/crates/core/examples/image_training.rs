//! Two PPO updates on rendered 64x48 camera images.
//!
//! `cargo run --release --example image_training [updates]`

use std::sync::Arc;

use dracer::fabric::{run_sequential, Budget, RunSpec};
use dracer::rl::TrainerConfig;
use dracer::sim::{ObsMode, SimConfig, Track};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let updates: u64 = std::env::args().nth(1).map_or(Ok(2), |s| s.parse())?;
    let track = Arc::new(Track::oval(8.0, 1.0, 0.6)?);
    let sim = SimConfig { obs_mode: ObsMode::Image, ..SimConfig::small_image() };
    let spec = RunSpec::new(track, sim, TrainerConfig::default(), 0, Budget::updates(updates));
    println!("architecture {:?}", spec.architecture());
    let run = run_sequential(&spec)?;
    for r in &run.metrics {
        println!(
            "update {} steps {:>5}  policy loss {:+.4}  value loss {:.4}  entropy {:.3}  clip {:.3}",
            r.update, r.steps, r.policy_loss, r.value_loss, r.entropy, r.clip_frac
        );
    }
    Ok(())
}
