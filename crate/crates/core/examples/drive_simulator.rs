//! Drives one lap with the hand-built centerline controller, logging the
//! trajectory and saving camera frames as PGM images.
//!
//! `cargo run --example drive_simulator [out_dir]`

use std::path::PathBuf;
use std::sync::Arc;

use dracer::eval::{centerline_controller, GreedyPolicy};
use dracer::sim::{EpisodeConfig, EpisodeTrace, RacingEnv, SimConfig, Track};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("dracer-drive"), PathBuf::from);
    std::fs::create_dir_all(&out)?;

    let track = Arc::new(Track::oval(8.0, 1.0, 0.6)?);
    let mut env = RacingEnv::new(track, SimConfig::features())?;
    let controller = centerline_controller(env.action_space(), env.config().wheelbase);

    let mut obs = env.reset(&EpisodeConfig::forward_from(0, 2000))?;
    let mut trace = EpisodeTrace::default();
    loop {
        let action = controller.greedy_action(&obs)?;
        let result = env.step(action)?;
        trace.record(&env, action, &result);
        if env.steps() % 100 == 0 {
            let frame = env.camera().render(env.state(), &env.track().centerline);
            std::fs::write(out.join(format!("frame_{:04}.pgm", env.steps())), frame.to_pgm())?;
        }
        if result.done {
            println!(
                "{} steps, progress {:.3}, lap complete {}, off track {}",
                env.steps(),
                result.info.progress,
                result.info.lap_complete,
                result.info.off_track
            );
            break;
        }
        obs = result.observation;
    }
    std::fs::write(out.join("trace.csv"), trace.to_csv())?;
    println!("wrote {} trace rows to {}", trace.len(), out.display());
    Ok(())
}
