use crate::rl::{Architecture, PolicyValueNets};
use crate::sim::ActionSpace;

const OFFSET_GAIN: f32 = 0.6;
const HEADING_GAIN: f32 = 1.2;
const SHARPNESS: f32 = 50.0;
const LOW_THROTTLE_BIAS: f32 = 1.0;

/// A feature-observation network that tracks the centerline.
///
/// The first hidden layer computes a steering command `u` (and `−u`) that
/// feeds forward the curvature ahead and corrects offset and heading; the
/// second copies it through. Head logits are `β(s·u − s²/2)`, which the
/// steering level `s` nearest to `u` maximises, plus a bias toward the
/// lowest throttle. The value network is zero.
pub fn centerline_controller(space: &ActionSpace, wheelbase: f64) -> PolicyValueNets<f32> {
    let mut nets = PolicyValueNets::<f32>::zeros(Architecture::features(), space.count(), 0.0)
        .expect("feature architecture is valid");
    let params = nets.policy.params_mut();
    let hidden = 64;
    let inputs = 8;
    let l = wheelbase as f32;
    // features: offset, heading error, speed, curvature at 0.2, 0.5, 1, 2, 4 m
    let law = [-OFFSET_GAIN, -HEADING_GAIN, 0.0, 0.5 * l, 0.5 * l, 0.0, 0.0, 0.0];
    let w0 = params[0].tensor.data_mut();
    for (j, &g) in law.iter().enumerate() {
        w0[j] = g;
        w0[inputs + j] = -g;
    }
    let w1 = params[2].tensor.data_mut();
    w1[0] = 1.0;
    w1[hidden + 1] = 1.0;
    let (w2, b2) = params[4..].split_at_mut(1);
    let (w2, b2) = (w2[0].tensor.data_mut(), b2[0].tensor.data_mut());
    for (si, &s) in space.steering_levels.iter().enumerate() {
        let s = s as f32;
        for ti in 0..space.throttle_levels.len() {
            let a = space.index_of(si, ti);
            w2[a * hidden] = SHARPNESS * s;
            w2[a * hidden + 1] = -SHARPNESS * s;
            b2[a] = -SHARPNESS * s * s / 2.0 + if ti == 0 { LOW_THROTTLE_BIAS } else { 0.0 };
        }
    }
    nets
}
