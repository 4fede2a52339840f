use super::{SimConfig, SimError};

/// Discrete steering × throttle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    /// Radians, strictly increasing.
    pub steering_levels: Vec<f64>,
    /// m/s, strictly increasing and positive.
    pub throttle_levels: Vec<f64>,
}

impl ActionSpace {
    pub fn from_config(cfg: &SimConfig) -> Self {
        ActionSpace {
            steering_levels: cfg.steering_deg.iter().map(|d| d.to_radians()).collect(),
            throttle_levels: cfg.throttle_frac.iter().map(|f| f * cfg.vmax).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.steering_levels.len() * self.throttle_levels.len()
    }

    pub fn max_steering(&self) -> f64 {
        self.steering_levels.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }

    /// `index = steering_idx × throttle_count + throttle_idx`.
    pub fn map_action(&self, index: usize) -> Result<(f64, f64), SimError> {
        if index >= self.count() {
            return Err(SimError::ActionOutOfRange { index, count: self.count() });
        }
        let tc = self.throttle_levels.len();
        Ok((self.steering_levels[index / tc], self.throttle_levels[index % tc]))
    }

    pub fn index_of(&self, steering_idx: usize, throttle_idx: usize) -> usize {
        steering_idx * self.throttle_levels.len() + throttle_idx
    }
}
