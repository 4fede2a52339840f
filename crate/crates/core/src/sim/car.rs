use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Point2};

use super::SimConfig;

/// Kinematic car pose and actuator state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CarState {
    pub x: f64,
    pub y: f64,
    /// Radians in (−π, π].
    pub heading: f64,
    /// m/s, never negative.
    pub speed: f64,
    pub steering_angle: f64,
}

impl CarState {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Advances one frame of the kinematic bicycle with explicit Euler
    /// substeps. Steering is applied immediately; speed follows the target
    /// through a first-order lag.
    pub fn integrate(&self, steering: f64, target_speed: f64, cfg: &SimConfig) -> CarState {
        let h = cfg.dt / cfg.substeps as f64;
        let mut s = *self;
        s.steering_angle = steering;
        let yaw_gain = steering.tan() / cfg.wheelbase;
        // exact decay factor would be exp(-h/tau); Euler keeps the integrator uniform
        let lag = (h / cfg.speed_tau).min(1.0);
        for _ in 0..cfg.substeps {
            s.x += s.speed * s.heading.cos() * h;
            s.y += s.speed * s.heading.sin() * h;
            s.heading += s.speed * yaw_gain * h;
            s.speed += (target_speed - s.speed) * lag;
        }
        s.heading = normalize_angle(s.heading);
        s.speed = s.speed.clamp(0.0, cfg.vmax);
        s
    }
}
