use crate::geometry::{CenterLine, TrackPose};

use super::CarState;

/// Everything a reward function may look at after a step.
#[derive(Debug, Clone, Copy)]
pub struct RewardContext<'a> {
    pub pose: &'a TrackPose,
    pub centerline: &'a CenterLine,
    pub state: &'a CarState,
    pub progress: f64,
    pub off_track: bool,
    pub lap_complete: bool,
}

pub trait RewardFn: Send + Sync {
    fn reward(&self, ctx: &RewardContext<'_>) -> f64;
}

impl<F> RewardFn for F
where
    F: Fn(&RewardContext<'_>) -> f64 + Send + Sync,
{
    fn reward(&self, ctx: &RewardContext<'_>) -> f64 {
        self(ctx)
    }
}

/// Banded centerline reward: 1.0 within 10% of the width, 0.5 within 25%,
/// 0.1 within 50%, 0.001 beyond.
pub fn default_reward(pose: &TrackPose, cl: &CenterLine) -> f64 {
    let d = pose.lateral_deviation;
    let w = cl.width_at(pose);
    if d <= 0.1 * w {
        1.0
    } else if d <= 0.25 * w {
        0.5
    } else if d <= 0.5 * w {
        0.1
    } else {
        0.001
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CenterlineReward;

impl RewardFn for CenterlineReward {
    fn reward(&self, ctx: &RewardContext<'_>) -> f64 {
        default_reward(ctx.pose, ctx.centerline)
    }
}
