use std::fmt::Write as _;

use super::{RacingEnv, StepResult};

/// Per-step CSV log: `step,x,y,heading,speed,action,reward,progress,done`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    rows: Vec<String>,
}

impl EpisodeTrace {
    pub const HEADER: &'static str = "step,x,y,heading,speed,action,reward,progress,done";

    pub fn record(&mut self, env: &RacingEnv, action: usize, result: &StepResult) {
        let s = env.state();
        self.rows.push(format!(
            "{},{:.6},{:.6},{:.6},{:.6},{},{},{:.6},{}",
            env.steps(),
            s.x,
            s.y,
            s.heading,
            s.speed,
            action,
            result.reward,
            result.info.progress,
            result.done as u8
        ));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        let _ = writeln!(out, "{}", Self::HEADER);
        for r in &self.rows {
            let _ = writeln!(out, "{r}");
        }
        out
    }
}
