use crate::geometry::{normalize_angle, CenterLine, Direction, TrackPose};

use super::{CarState, FEATURE_LEN};

/// Arclength offsets (meters, along the direction of travel) of the
/// curvature samples.
pub const LOOKAHEAD: [f64; 5] = [0.2, 0.5, 1.0, 2.0, 4.0];

/// Compact observation: offset and heading relative to the direction of
/// travel, normalized speed and upcoming curvature. Reverse travel flips the
/// sign of offset and curvature so both directions look alike to a policy.
pub fn extract_features(
    state: &CarState,
    pose: &TrackPose,
    cl: &CenterLine,
    direction: Direction,
    vmax: f64,
) -> [f32; FEATURE_LEN] {
    let sign = direction.sign();
    let half = 0.5 * cl.width_at(pose);
    let travel_heading = match direction {
        Direction::Forward => pose.heading_of_segment,
        Direction::Reverse => pose.heading_of_segment + std::f64::consts::PI,
    };
    let mut f = [0.0f32; FEATURE_LEN];
    f[0] = (sign * pose.signed_offset / half) as f32;
    f[1] = normalize_angle(state.heading - travel_heading) as f32;
    f[2] = (state.speed / vmax) as f32;
    for (k, ahead) in LOOKAHEAD.iter().enumerate() {
        f[3 + k] = (sign * cl.curvature_at(pose.arclength_s + sign * ahead)) as f32;
    }
    f
}
