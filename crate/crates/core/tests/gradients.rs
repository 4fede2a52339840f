mod common;

use common::{full_weights, gradient_check, small_feature_arch, small_image_arch};
use dracer::rl::LossWeights;

const TOL: f64 = 1e-4;

fn only(surrogate: f64, value: f64, entropy: f64, l2: f64) -> LossWeights {
    LossWeights { surrogate, value, entropy, l2, clip_eps: 0.2 }
}

#[test]
fn each_loss_term_matches_finite_differences() {
    for (name, w) in [
        ("surrogate", only(1.0, 0.0, 0.0, 0.0)),
        ("value", only(0.0, 0.5, 0.0, 0.0)),
        ("entropy", only(0.0, 0.0, 0.1, 0.0)),
        ("l2", only(0.0, 0.0, 0.0, 2e-5)),
    ] {
        for arch in [small_feature_arch(), small_image_arch()] {
            let r = gradient_check(11, arch, 3, &w);
            assert!(r.max_rel_error < TOL, "{name} {arch:?}: {}", r.max_rel_error);
        }
    }
}

#[test]
fn combined_loss_matches_finite_differences() {
    for seed in 0..5 {
        for arch in [small_feature_arch(), small_image_arch()] {
            let r = gradient_check(seed, arch, 3, &full_weights());
            assert!(r.params_checked > 100);
            assert!(r.max_rel_error < TOL, "seed {seed} {arch:?}: {}", r.max_rel_error);
        }
    }
}
