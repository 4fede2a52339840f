use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const METRICS_HEADER: &str =
    "update,version,episodes,steps,mean_reward,mean_progress,policy_loss,value_loss,entropy,clip_frac,wall_s";

/// One trainer update, as written to the metrics file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsRow {
    pub update: u64,
    pub version: u64,
    /// Cumulative episodes trained on.
    pub episodes: u64,
    /// Cumulative simulation steps trained on.
    pub steps: u64,
    /// Mean undiscounted episode return of this update's episodes.
    pub mean_reward: f64,
    pub mean_progress: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub wall_s: f64,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.update,
            self.version,
            self.episodes,
            self.steps,
            self.mean_reward,
            self.mean_progress,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.clip_frac,
            self.wall_s
        )
    }

    pub fn from_csv(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 11 {
            return None;
        }
        Some(MetricsRow {
            update: f[0].parse().ok()?,
            version: f[1].parse().ok()?,
            episodes: f[2].parse().ok()?,
            steps: f[3].parse().ok()?,
            mean_reward: f[4].parse().ok()?,
            mean_progress: f[5].parse().ok()?,
            policy_loss: f[6].parse().ok()?,
            value_loss: f[7].parse().ok()?,
            entropy: f[8].parse().ok()?,
            clip_frac: f[9].parse().ok()?,
            wall_s: f[10].parse().ok()?,
        })
    }
}

pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{METRICS_HEADER}")?;
        out.flush()?;
        Ok(MetricsWriter { out })
    }

    pub fn append(&mut self, row: &MetricsRow) -> std::io::Result<()> {
        writeln!(self.out, "{}", row.to_csv())?;
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_round_trip() {
        let row = MetricsRow {
            update: 3,
            version: 4,
            episodes: 60,
            steps: 1234,
            mean_reward: 12.5,
            mean_progress: 1.0 / 3.0,
            policy_loss: -0.01,
            value_loss: 0.2,
            entropy: 2.2,
            clip_frac: 0.05,
            wall_s: 1.5,
        };
        assert_eq!(MetricsRow::from_csv(&row.to_csv()), Some(row));
        assert_eq!(METRICS_HEADER.split(',').count(), 11);
    }
}
