//! Samples episode starts, perturbed actions and image augmentations.
//!
//! `cargo run --example domain_randomization [out_dir]`

use std::path::PathBuf;

use dracer::randomize::{augment_image, perturb_action, randomize_episode, ImageAug, RandomizationConfig};
use dracer::sim::{ActionSpace, Camera, SimConfig, Track};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("dracer-randomize"), PathBuf::from);
    std::fs::create_dir_all(&out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let track = Track::oval(8.0, 1.0, 0.6)?;
    let sim = SimConfig::small_image();

    let cfg = RandomizationConfig { randomize_start: true, ..RandomizationConfig::noise_and_reverse() };
    for k in 0..4 {
        let ep = randomize_episode(k, &track, &cfg, sim.max_steps, &mut rng);
        println!("episode {k}: start waypoint {}, {}", ep.start_waypoint_index, ep.direction.as_str());
    }

    let space = ActionSpace::from_config(&sim);
    let (steer, speed) = space.map_action(space.count() - 1)?;
    for _ in 0..3 {
        let (s, v) = perturb_action(steer, speed, cfg.action_noise_frac, &space, sim.vmax, &mut rng);
        println!("action ({steer:+.3}, {speed:.3}) -> ({s:+.3}, {v:.3})");
    }

    let start = track.centerline.waypoints[0];
    let heading = track.centerline.segment_heading(0);
    let state = dracer::sim::CarState { x: start.x, y: start.y, heading, ..Default::default() };
    let frame = Camera::from_config(&sim).render(&state, &track.centerline);
    std::fs::write(out.join("clean.pgm"), frame.to_pgm())?;
    for aug in ImageAug::ALL {
        let only = RandomizationConfig { image_augs: vec![aug], aug_probability: 1.0, ..RandomizationConfig::none() };
        let img = augment_image(&frame, &only, &mut rng);
        std::fs::write(out.join(format!("{}.pgm", aug.as_str())), img.to_pgm())?;
    }
    println!("wrote augmented frames to {}", out.display());
    Ok(())
}
